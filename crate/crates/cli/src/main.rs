use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use topicrec_core::bim::{
    candidate_bags, train_index, training_bags, BimParams, TokenExtractor, TopicModelIndex, DEFAULT_DELTA,
    DEFAULT_MIN_COUNT, DEFAULT_NU, DEFAULT_TOP_N,
};
use topicrec_core::corpus::{read_tweets, Corpus, CorpusPaths};
use topicrec_core::eval::{compute_metrics, read_judgments, write_report};
use topicrec_core::expertise::{
    mine_experts, ExpertSet, MinerConfig, TopicMatcher, DEFAULT_EXPERT_THRESHOLD, DEFAULT_MAX_TOPICS,
};
use topicrec_core::interest::{
    build_popularity, infer_interest, read_interests, write_interests, EmConfig, InterestError, InterestVector,
    DEFAULT_MAX_ITERATIONS, DEFAULT_REL_IMPROVEMENT_STOP,
};
use topicrec_core::ndjson::write_ndjson;
use topicrec_core::recommend::{
    recommend_cached, write_recommendations, RecommendConfig, TopicListCache, DEFAULT_JACCARD_THRESHOLD, DEFAULT_LIMIT,
};
use topicrec_core::synth::{generate, write_popularity_bias_fixture, SynthSpec};
use topicrec_core::text::Stopwords;
use topicrec_service::{AppState, ServiceConfig, Sources};

#[derive(Parser)]
#[command(name = "topicrec", version, about = "Topical interests, tweet scoring and explained recommendations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate raw inputs and write a corpus store.
    Ingest(IngestArgs),
    /// Mine topical experts from List memberships.
    MineExperts(MineArgs),
    /// Infer users' topical interests with EM.
    InferInterests(InferArgs),
    /// Train the topical BIM count tables.
    TrainBim(TrainArgs),
    /// Rank tweets for one topic.
    Score(ScoreArgs),
    /// Build explained recommendation lists.
    Recommend(RecommendArgs),
    /// Generate a synthetic corpus with ground truth.
    Synth(SynthArgs),
    /// Compute ranking metrics from judged lists.
    Eval(EvalArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    lists: PathBuf,
    #[arg(long)]
    tweets: PathBuf,
    #[arg(long)]
    follows: PathBuf,
    #[arg(long)]
    profiles: PathBuf,
    #[arg(long)]
    topics: PathBuf,
    #[arg(long)]
    redirects: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fail on the first invalid line instead of skipping it.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    store: PathBuf,
    /// Directory of `*.txt` stopword lists; the built-in lists when omitted.
    #[arg(long)]
    stopwords_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EXPERT_THRESHOLD)]
    threshold: u32,
    #[arg(long, default_value_t = DEFAULT_MAX_TOPICS)]
    max_topics: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    experts: PathBuf,
    /// User to infer; repeatable.
    #[arg(long = "user", required_unless_present = "all_users")]
    users: Vec<String>,
    /// Every user in the store that follows at least one expert.
    #[arg(long, conflicts_with = "users")]
    all_users: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iters: usize,
    /// Relative log-likelihood improvement below which EM stops.
    #[arg(long, default_value_t = DEFAULT_REL_IMPROVEMENT_STOP)]
    stop: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    experts: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
    k: u64,
    /// Number of largest factors multiplied; 0 multiplies all of them.
    #[arg(long, default_value_t = DEFAULT_NU)]
    nu: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    topic: String,
    /// Tweets in the corpus tweet format; non-English tweets are skipped.
    #[arg(long)]
    tweets: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOP_N)]
    top: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RecommendArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    experts: PathBuf,
    #[arg(long)]
    interests: PathBuf,
    #[arg(long)]
    index: PathBuf,
    /// User to recommend for; repeatable.
    #[arg(long = "user", required_unless_present = "all_users")]
    users: Vec<String>,
    /// Every user in the interests file.
    #[arg(long, conflicts_with = "users")]
    all_users: bool,
    /// Interest topics consulted.
    #[arg(long, default_value_t = topicrec_core::recommend::DEFAULT_MAX_TOPICS)]
    m: usize,
    /// Tweets scored per topic.
    #[arg(long, default_value_t = DEFAULT_TOP_N)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_JACCARD_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_LIMIT)]
    limit: usize,
    /// Timestamp written into each list; the current UTC time when omitted.
    #[arg(long)]
    generated_at: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON file with the generator parameters.
    #[arg(long, required_unless_present = "popularity_bias")]
    spec: Option<PathBuf>,
    /// Write the hand-built popularity-bias fixture instead.
    #[arg(long, conflicts_with = "spec")]
    popularity_bias: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    judgments: PathBuf,
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    experts: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    interests: Option<PathBuf>,
    /// Edit journal directory; `<store>/journal` when omitted.
    #[arg(long)]
    journal: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Allowed browser origin; any origin when omitted.
    #[arg(long)]
    cors_origin: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::MineExperts(a) => mine(a),
        Command::InferInterests(a) => infer(a),
        Command::TrainBim(a) => train(a),
        Command::Score(a) => score(a),
        Command::Recommend(a) => recommend_cmd(a),
        Command::Synth(a) => synth(a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn reader(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

/// Writes through a buffer and flushes, reporting the path on failure.
fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    f(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))
}

fn load_experts(path: &Path) -> Result<ExpertSet> {
    let (experts, parsed) = ExpertSet::read(reader(path)?, true).with_context(|| format!("reading {}", path.display()))?;
    log::info!("{}: {} experts", path.display(), parsed.lines);
    Ok(experts)
}

fn open_store(dir: &Path) -> Result<Corpus> {
    Corpus::open(dir).with_context(|| format!("opening store {}", dir.display()))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let paths = CorpusPaths {
        lists: a.lists,
        tweets: a.tweets,
        follows: a.follows,
        profiles: a.profiles,
        topics: a.topics,
        redirects: a.redirects,
    };
    let corpus = Corpus::ingest(&paths, a.strict)?;
    corpus.persist(&a.out)?;
    for f in &corpus.report().files {
        eprintln!("{}: {} lines, {} accepted, {} rejected", f.file, f.lines, f.accepted, f.rejected);
    }
    Ok(())
}

fn mine(a: MineArgs) -> Result<()> {
    let corpus = open_store(&a.store)?;
    let stopwords = match &a.stopwords_dir {
        Some(dir) => Stopwords::from_dir(dir).with_context(|| format!("reading stopwords from {}", dir.display()))?,
        None => Stopwords::defaults(),
    };
    if a.threshold == 0 {
        bail!("--threshold must be at least 1");
    }
    let matcher = TopicMatcher::new(corpus.catalog(), &stopwords);
    let config = MinerConfig {
        expert_threshold: a.threshold,
        max_topics: a.max_topics,
    };
    let experts = mine_experts(&corpus, &matcher, config);
    eprintln!("{} experts over {} topics", experts.len(), experts.topics().len());
    write_file(&a.out, |w| experts.write(w))
}

fn infer(a: InferArgs) -> Result<()> {
    let corpus = open_store(&a.store)?;
    let experts = load_experts(&a.experts)?;
    let popularity = build_popularity(&experts)?;
    let config = EmConfig {
        rel_improvement_stop: a.stop,
        max_iterations: a.max_iters,
    };
    config.validate()?;
    let users: Vec<String> = if a.all_users {
        corpus.users().map(str::to_string).collect()
    } else {
        a.users
    };
    let results: Vec<(String, Result<InterestVector, InterestError>)> = users
        .par_iter()
        .map(|u| (u.clone(), infer_interest(u, &corpus, &experts, &popularity, &config)))
        .collect();
    let mut vectors = Vec::with_capacity(results.len());
    let mut skipped = 0usize;
    for (user, r) in results {
        match r {
            Ok(v) => vectors.push(v),
            Err(InterestError::NoExpertFollowings(_)) if a.all_users => skipped += 1,
            Err(e) => return Err(e).with_context(|| format!("user {user}")),
        }
    }
    vectors.sort_by(|x, y| x.user_id.cmp(&y.user_id));
    eprintln!("{} users inferred, {} skipped without expert followings", vectors.len(), skipped);
    write_file(&a.out, |w| write_interests(w, &vectors))
}

fn bim_params(delta: f64, k: u64, nu: usize) -> Result<BimParams> {
    let params = BimParams {
        delta,
        k,
        nu: (nu > 0).then_some(nu),
    };
    params.validate()?;
    Ok(params)
}

fn train(a: TrainArgs) -> Result<()> {
    let params = bim_params(a.delta, a.k, a.nu)?;
    let corpus = open_store(&a.store)?;
    let experts = load_experts(&a.experts)?;
    let bags = training_bags(corpus.tweets(), &experts, &TokenExtractor::default());
    let index = train_index(bags.par_iter().map(|(b, t)| (b, t.as_slice())), params);
    eprintln!(
        "{} tweets, {} entities, {} topics",
        index.n(),
        index.num_entities(),
        index.topics().len()
    );
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    index.write_to(&a.out).with_context(|| format!("writing {}", a.out.display()))
}

#[derive(Serialize)]
struct ScoreRecord<'a> {
    tweet_id: &'a str,
    topic: &'a str,
    score: f64,
    log_score: f64,
}

fn score(a: ScoreArgs) -> Result<()> {
    let index = TopicModelIndex::open(&a.index).with_context(|| format!("reading {}", a.index.display()))?;
    let tweets = read_tweets(reader(&a.tweets)?, false).with_context(|| format!("reading {}", a.tweets.display()))?;
    if !tweets.rejections.is_empty() {
        log::warn!("{}: {} lines rejected", a.tweets.display(), tweets.rejections.len());
    }
    if !index.has_topic(&a.topic) {
        log::warn!("topic {:?} has no expert tweets in the index; every score is 1", a.topic);
    }
    let bags = candidate_bags(&tweets.records, &TokenExtractor::default());
    let ranked = index.top_tweets(&a.topic, &bags, a.top);
    let records = ranked.iter().map(|r| ScoreRecord {
        tweet_id: &r.bag.tweet_id,
        topic: &a.topic,
        score: r.score(),
        log_score: r.log_score,
    });
    write_file(&a.out, |w| write_ndjson(w, records))
}

fn recommend_cmd(a: RecommendArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.threshold) {
        bail!("--threshold must be in [0, 1]");
    }
    let corpus = open_store(&a.store)?;
    let experts = load_experts(&a.experts)?;
    let (interests, _) = read_interests(reader(&a.interests)?, true).with_context(|| format!("reading {}", a.interests.display()))?;
    let index = TopicModelIndex::open(&a.index).with_context(|| format!("reading {}", a.index.display()))?;
    let candidates = candidate_bags(corpus.tweets(), &TokenExtractor::default());
    let config = RecommendConfig {
        max_topics: a.m,
        top_n: a.n,
        threshold: a.threshold,
        limit: a.limit,
    };
    let generated_at = a.generated_at.unwrap_or_else(now);
    let users: Vec<String> = if a.all_users { interests.keys().cloned().collect() } else { a.users };

    // Users missing from the interests file are inferred on the fly.
    let popularity = build_popularity(&experts)?;
    let mut inferred: BTreeMap<String, InterestVector> = BTreeMap::new();
    for u in &users {
        if !interests.contains_key(u) {
            log::info!("{u} not in {}; inferring", a.interests.display());
            let v = infer_interest(u, &corpus, &experts, &popularity, &EmConfig::default())
                .with_context(|| format!("user {u}"))?;
            inferred.insert(u.clone(), v);
        }
    }
    let cache = TopicListCache::new();
    let lists = users
        .par_iter()
        .map(|u| {
            let iv = interests.get(u).or_else(|| inferred.get(u)).expect("inferred above");
            recommend_cached(iv, &index, &candidates, &config, &generated_at, &cache)
                .with_context(|| format!("user {u}"))
        })
        .collect::<Result<Vec<_>>>()?;
    write_file(&a.out, |w| write_recommendations(w, &lists))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn synth(a: SynthArgs) -> Result<()> {
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    if a.popularity_bias {
        return write_popularity_bias_fixture(&a.out).with_context(|| format!("writing {}", a.out.display()));
    }
    let path = a.spec.expect("required by clap");
    let spec: SynthSpec = serde_json::from_reader(reader(&path)?).with_context(|| format!("parsing {}", path.display()))?;
    let corpus = generate(&spec)?;
    eprintln!(
        "{} lists, {} tweets, {} follow edges",
        corpus.lists.len(),
        corpus.tweets.len(),
        corpus.follows.len()
    );
    corpus.write(&a.out).with_context(|| format!("writing {}", a.out.display()))
}

fn eval(a: EvalArgs) -> Result<()> {
    let parsed = read_judgments(reader(&a.judgments)?, a.strict).with_context(|| format!("reading {}", a.judgments.display()))?;
    for r in &parsed.rejections {
        log::warn!("{}: line {}: {}", a.judgments.display(), r.line, r.reason);
    }
    let report = compute_metrics(&parsed.records)?;
    write_file(&a.out, |w| write_report(w, &report))
}

fn serve(a: ServeArgs) -> Result<()> {
    let journal = a.journal.clone().unwrap_or_else(|| a.store.join("journal"));
    let sources = Sources {
        store: a.store,
        experts: a.experts,
        index: a.index,
        interests: a.interests,
    };
    let config = ServiceConfig {
        cors_origin: a.cors_origin,
        ..ServiceConfig::default()
    };
    let state = AppState::new(sources, &journal, config, Arc::new(now))?;
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .with_context(|| format!("bad listen address {}:{}", a.host, a.port))?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        topicrec_service::serve(state, listener).await?;
        Ok(())
    })
}
