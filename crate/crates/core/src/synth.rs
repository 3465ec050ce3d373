//! Synthetic corpora with known ground truth.
//!
//! Follows are drawn by the same two-step process the interest model assumes:
//! pick a topic from the user's interest vector, then an expert on that topic
//! in proportion to its popularity (List count for regular topics, follower
//! count plus one for the global topic). Lists are laid out so that mining
//! recovers exactly the List counts used for sampling.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Pareto};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    Corpus, FollowEdge, IngestReport, ListRecord, TopicCatalog, TweetRecord, UserProfile, FOLLOWS_FILE, LISTS_FILE,
    PROFILES_FILE, REDIRECTS_FILE, TOPICS_FILE, TWEETS_FILE,
};
use crate::expertise::{ExpertRecord, ExpertSet};
use crate::interest::GLOBAL_TOPIC;
use crate::ndjson::{self, id, Parsed, ReadError};
use crate::text::Stopwords;

pub const GROUND_TRUTH_FILE: &str = "ground_truth.ndjson";
pub const EXPECTED_FILE: &str = "expected.json";

const TOPIC_POOL: &[&str] = &[
    "Astronomy",
    "Baseball",
    "Biology",
    "Chemistry",
    "Cooking",
    "Cricket",
    "Cycling",
    "Economics",
    "Fashion",
    "Football",
    "Gardening",
    "Geology",
    "Golf",
    "Hiking",
    "History",
    "Jazz",
    "Linguistics",
    "Mathematics",
    "Medicine",
    "Movies",
    "Nutrition",
    "Opera",
    "Painting",
    "Philosophy",
    "Photography",
    "Physics",
    "Poetry",
    "Psychology",
    "Robotics",
    "Rugby",
    "Sailing",
    "Sculpture",
    "Skiing",
    "Swimming",
    "Tennis",
    "Theatre",
    "Travel",
    "Wine",
];

const CONSONANTS: &[u8] = b"bdfghjklmnprstv";
const VOWELS: &[u8] = b"aeiou";

/// Share of tweet entities drawn uniformly instead of from the topic.
const BACKGROUND_RATE: f64 = 0.2;
const HASHTAG_RATE: f64 = 0.1;
const MAX_LIST_COUNT: f64 = 200.0;
const MAX_FOLLOWERS: f64 = 1e6;
const EPOCH: i64 = 1_300_000_000;

fn default_interests_per_user() -> usize {
    3
}

fn default_global_weight() -> f64 {
    0.2
}

fn default_max_topics_per_expert() -> usize {
    3
}

fn default_interest_concentration() -> f64 {
    2.0
}

/// Generator parameters. `seed` fixes every random draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub num_topics: usize,
    pub num_experts: usize,
    pub num_users: usize,
    /// Follow draws per user; repeated experts collapse into one edge.
    pub follows_per_user: usize,
    pub tweets_per_expert: usize,
    pub vocab_size: usize,
    pub entities_per_tweet: usize,
    /// Power-law exponent of each topic's entity distribution.
    pub topic_entity_skew: f64,
    pub seed: u64,
    /// Regular topics per user (capped at `num_topics`).
    #[serde(default = "default_interests_per_user")]
    pub interests_per_user: usize,
    /// True weight of the global topic in every user's interest vector.
    #[serde(default = "default_global_weight")]
    pub global_weight: f64,
    #[serde(default = "default_max_topics_per_expert")]
    pub max_topics_per_expert: usize,
    /// Dirichlet concentration of the regular-topic weights.
    #[serde(default = "default_interest_concentration")]
    pub interest_concentration: f64,
}

impl SynthSpec {
    /// A spec with the optional fields at their defaults.
    pub fn new(
        num_topics: usize,
        num_experts: usize,
        num_users: usize,
        follows_per_user: usize,
        seed: u64,
    ) -> Self {
        SynthSpec {
            num_topics,
            num_experts,
            num_users,
            follows_per_user,
            tweets_per_expert: 5,
            vocab_size: 1000,
            entities_per_tweet: 5,
            topic_entity_skew: 1.0,
            seed,
            interests_per_user: default_interests_per_user(),
            global_weight: default_global_weight(),
            max_topics_per_expert: default_max_topics_per_expert(),
            interest_concentration: default_interest_concentration(),
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        for (name, v) in [
            ("num_topics", self.num_topics),
            ("num_experts", self.num_experts),
            ("num_users", self.num_users),
            ("follows_per_user", self.follows_per_user),
            ("tweets_per_expert", self.tweets_per_expert),
            ("vocab_size", self.vocab_size),
            ("entities_per_tweet", self.entities_per_tweet),
            ("interests_per_user", self.interests_per_user),
            ("max_topics_per_expert", self.max_topics_per_expert),
        ] {
            if v == 0 {
                return Err(SpecError::Zero(name));
            }
        }
        if self.num_topics > self.num_experts {
            return Err(SpecError::Infeasible(format!(
                "{} topics cannot each get an expert from {} experts",
                self.num_topics, self.num_experts
            )));
        }
        if self.entities_per_tweet > self.vocab_size {
            return Err(SpecError::Infeasible(format!(
                "{} entities per tweet exceed a vocabulary of {}",
                self.entities_per_tweet, self.vocab_size
            )));
        }
        if !(self.topic_entity_skew.is_finite() && self.topic_entity_skew >= 0.0) {
            return Err(SpecError::Parameter(format!("topic_entity_skew = {}", self.topic_entity_skew)));
        }
        if !(0.0..1.0).contains(&self.global_weight) {
            return Err(SpecError::Parameter(format!("global_weight = {} not in [0, 1)", self.global_weight)));
        }
        if !(self.interest_concentration.is_finite() && self.interest_concentration > 0.0) {
            return Err(SpecError::Parameter(format!(
                "interest_concentration = {}",
                self.interest_concentration
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("{0} must be positive")]
    Zero(&'static str),
    #[error("infeasible spec: {0}")]
    Infeasible(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// One line of `ground_truth.ndjson`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TruthRecord {
    User {
        #[serde(deserialize_with = "id::deserialize")]
        user_id: String,
        true_interest: BTreeMap<String, f64>,
    },
    Expert {
        #[serde(deserialize_with = "id::deserialize")]
        expert_id: String,
        topics: Vec<String>,
    },
}

/// A generated corpus plus the parameters that produced it.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub catalog: TopicCatalog,
    pub lists: Vec<ListRecord>,
    pub tweets: Vec<TweetRecord>,
    pub follows: Vec<FollowEdge>,
    pub profiles: Vec<UserProfile>,
    /// The experts with the List counts and follower counts used for sampling.
    pub experts: ExpertSet,
    pub true_interests: BTreeMap<String, BTreeMap<String, f64>>,
}

impl SynthCorpus {
    pub fn corpus(&self) -> Corpus {
        Corpus::from_parts(
            self.catalog.clone(),
            self.lists.clone(),
            self.tweets.clone(),
            self.follows.clone(),
            self.profiles.clone(),
            IngestReport::default(),
        )
    }

    pub fn truth_records(&self) -> Vec<TruthRecord> {
        let users = self.true_interests.iter().map(|(u, i)| TruthRecord::User {
            user_id: u.clone(),
            true_interest: i.clone(),
        });
        let experts = self.experts.iter().map(|r| TruthRecord::Expert {
            expert_id: r.user_id.clone(),
            topics: r.expertise.keys().cloned().collect(),
        });
        users.chain(experts).collect()
    }

    /// Writes the corpus files and `ground_truth.ndjson` into `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let create = |name: &str| File::create(dir.join(name)).map(BufWriter::new);
        let mut w = create(TOPICS_FILE)?;
        for t in self.catalog.topics() {
            writeln!(w, "{t}\t{t}")?;
        }
        w.flush()?;
        let mut w = create(REDIRECTS_FILE)?;
        for (a, t) in self.catalog.redirects() {
            writeln!(w, "{a}\t{t}")?;
        }
        w.flush()?;
        ndjson::write_ndjson(create(LISTS_FILE)?, &self.lists)?;
        ndjson::write_ndjson(create(TWEETS_FILE)?, &self.tweets)?;
        ndjson::write_ndjson(create(FOLLOWS_FILE)?, &self.follows)?;
        ndjson::write_ndjson(create(PROFILES_FILE)?, &self.profiles)?;
        ndjson::write_ndjson(create(GROUND_TRUTH_FILE)?, self.truth_records())
    }
}

pub fn read_ground_truth<R: BufRead>(reader: R, strict: bool) -> Result<Parsed<TruthRecord>, ReadError> {
    ndjson::read_ndjson(reader, strict, Ok)
}

/// Topic titles used by the generator.
pub fn topic_titles(n: usize) -> Vec<String> {
    if n <= TOPIC_POOL.len() {
        TOPIC_POOL[..n].iter().map(|s| s.to_string()).collect()
    } else {
        (1..=n).map(|i| format!("Topic {i:03}")).collect()
    }
}

/// The `i`-th pseudo-word: three consonant-vowel syllables.
fn pseudo_word(mut i: usize) -> String {
    let base = CONSONANTS.len() * VOWELS.len();
    let mut out = String::with_capacity(6);
    for _ in 0..3 {
        let syl = i % base;
        i /= base;
        out.push(CONSONANTS[syl / VOWELS.len()] as char);
        out.push(VOWELS[syl % VOWELS.len()] as char);
    }
    out
}

/// `n` distinct pseudo-words, none of them a stopword.
pub fn vocabulary(n: usize) -> Vec<String> {
    let stop = Stopwords::defaults();
    (0..)
        .map(pseudo_word)
        .filter(|w| !stop.contains(w))
        .take(n)
        .collect()
}

/// Draws (topic, expert) follow events for one interest vector.
#[derive(Debug, Clone)]
pub struct FollowSampler {
    /// Per topic: candidate experts and their popularity weights.
    topics: BTreeMap<String, (Vec<String>, WeightedIndex<f64>)>,
}

impl FollowSampler {
    pub fn new(experts: &ExpertSet) -> Self {
        let mut by_topic: BTreeMap<String, (Vec<String>, Vec<f64>)> = BTreeMap::new();
        for r in experts.iter() {
            for (t, &lambda) in &r.expertise {
                let e = by_topic.entry(t.clone()).or_default();
                e.0.push(r.user_id.clone());
                e.1.push(lambda as f64);
            }
            let g = by_topic.entry(GLOBAL_TOPIC.to_string()).or_default();
            g.0.push(r.user_id.clone());
            g.1.push(r.follower_count as f64 + 1.0);
        }
        let topics = by_topic
            .into_iter()
            .map(|(t, (ids, w))| (t, (ids, WeightedIndex::new(w).expect("positive weights"))))
            .collect();
        FollowSampler { topics }
    }

    /// `n` independent draws. Topics without experts are never picked.
    pub fn draw<R: Rng>(&self, interest: &BTreeMap<String, f64>, n: usize, rng: &mut R) -> Vec<(String, String)> {
        let (names, weights): (Vec<&String>, Vec<f64>) = interest
            .iter()
            .filter(|(t, &w)| w > 0.0 && self.topics.contains_key(*t))
            .map(|(t, &w)| (t, w))
            .unzip();
        if names.is_empty() {
            return Vec::new();
        }
        let pick = WeightedIndex::new(&weights).expect("positive weights");
        (0..n)
            .map(|_| {
                let t = names[pick.sample(rng)];
                let (ids, w) = &self.topics[t];
                (t.clone(), ids[w.sample(rng)].clone())
            })
            .collect()
    }
}

/// Generates a corpus. Identical specs give identical output.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus, SpecError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let titles = topic_titles(spec.num_topics);
    let catalog = TopicCatalog::new(titles.iter().cloned(), Vec::<(String, String)>::new())
        .expect("generated titles are valid");

    // Experts: topic i % T first so every topic is covered, then extras.
    let lambda_dist = Pareto::new(10.0, 1.5).expect("valid pareto");
    let phi_dist = Pareto::new(50.0, 1.1).expect("valid pareto");
    let per_expert = spec.max_topics_per_expert.min(spec.num_topics);
    let mut experts = Vec::with_capacity(spec.num_experts);
    for i in 0..spec.num_experts {
        let mut topics = BTreeSet::from([i % spec.num_topics]);
        let extra = rng.random_range(1..=per_expert) - 1;
        while topics.len() < 1 + extra {
            topics.insert(rng.random_range(0..spec.num_topics));
        }
        let expertise = topics
            .into_iter()
            .map(|t| {
                let lambda: f64 = lambda_dist.sample(&mut rng);
                (titles[t].clone(), lambda.min(MAX_LIST_COUNT) as u32)
            })
            .collect();
        let phi: f64 = phi_dist.sample(&mut rng);
        experts.push(ExpertRecord {
            user_id: format!("e{:05}", i + 1),
            follower_count: phi.min(MAX_FOLLOWERS) as u64,
            expertise,
        });
    }

    let lists = build_lists(&titles, &experts);
    let expert_set: ExpertSet = experts.iter().cloned().collect();

    // Users: a Dirichlet draw over a random subset of topics, plus the
    // fixed global share.
    let k = spec.interests_per_user.min(spec.num_topics);
    let gamma = Gamma::new(spec.interest_concentration, 1.0).expect("valid gamma");
    let sampler = FollowSampler::new(&expert_set);
    let mut true_interests = BTreeMap::new();
    let mut follows = Vec::new();
    let mut profiles = Vec::new();
    for u in 0..spec.num_users {
        let user_id = format!("u{:05}", u + 1);
        let chosen = index::sample(&mut rng, spec.num_topics, k);
        let raw: Vec<f64> = (0..k).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = raw.iter().sum();
        let mut interest: BTreeMap<String, f64> = chosen
            .iter()
            .zip(&raw)
            .map(|(t, w)| (titles[t].clone(), (1.0 - spec.global_weight) * w / total))
            .collect();
        if spec.global_weight > 0.0 {
            interest.insert(GLOBAL_TOPIC.to_string(), spec.global_weight);
        }
        let followed: BTreeSet<String> = sampler
            .draw(&interest, spec.follows_per_user, &mut rng)
            .into_iter()
            .map(|(_, v)| v)
            .collect();
        follows.extend(followed.into_iter().map(|v| FollowEdge {
            follower_id: user_id.clone(),
            followee_id: v,
        }));
        profiles.push(UserProfile {
            user_id: user_id.clone(),
            follower_count: rng.random_range(0..200),
        });
        true_interests.insert(user_id, interest);
    }
    profiles.extend(experts.iter().map(|e| UserProfile {
        user_id: e.user_id.clone(),
        follower_count: e.follower_count,
    }));

    let tweets = build_tweets(spec, &titles, &experts, &mut rng);

    Ok(SynthCorpus {
        catalog,
        lists,
        tweets,
        follows,
        profiles,
        experts: expert_set,
        true_interests,
    })
}

/// List `j` of topic `t` holds every expert with `λ_{v,t} > j`.
fn build_lists(titles: &[String], experts: &[ExpertRecord]) -> Vec<ListRecord> {
    let mut lists = Vec::new();
    for (ti, t) in titles.iter().enumerate() {
        let on_topic: Vec<(&str, u32)> = experts
            .iter()
            .filter_map(|e| e.expertise.get(t).map(|&l| (e.user_id.as_str(), l)))
            .collect();
        let max = on_topic.iter().map(|(_, l)| *l).max().unwrap_or(0);
        for j in 0..max {
            lists.push(ListRecord {
                list_id: format!("l{:03}-{:03}", ti + 1, j + 1),
                owner_id: format!("o{:05}", j + 1),
                name: t.clone(),
                description: String::new(),
                member_ids: on_topic
                    .iter()
                    .filter(|(_, l)| *l > j)
                    .map(|(v, _)| v.to_string())
                    .collect(),
            });
        }
    }
    lists
}

fn build_tweets(spec: &SynthSpec, titles: &[String], experts: &[ExpertRecord], rng: &mut ChaCha8Rng) -> Vec<TweetRecord> {
    let vocab = vocabulary(spec.vocab_size);
    let rank_weights: Vec<f64> = (0..vocab.len())
        .map(|r| ((r + 1) as f64).powf(-spec.topic_entity_skew))
        .collect();
    let by_rank = WeightedIndex::new(&rank_weights).expect("positive weights");
    // Each topic ranks the vocabulary in its own order.
    let orders: BTreeMap<&str, Vec<usize>> = titles
        .iter()
        .map(|t| {
            let mut order: Vec<usize> = (0..vocab.len()).collect();
            order.shuffle(rng);
            (t.as_str(), order)
        })
        .collect();

    let mut tweets = Vec::with_capacity(experts.len() * spec.tweets_per_expert);
    let max_tries = 50 * spec.entities_per_tweet;
    for e in experts {
        let topics: Vec<&String> = e.expertise.keys().collect();
        for _ in 0..spec.tweets_per_expert {
            let order = &orders[topics[rng.random_range(0..topics.len())].as_str()];
            let mut picked: Vec<usize> = Vec::with_capacity(spec.entities_per_tweet);
            let mut tries = 0;
            while picked.len() < spec.entities_per_tweet && tries < max_tries {
                tries += 1;
                let w = if rng.random_bool(BACKGROUND_RATE) {
                    rng.random_range(0..vocab.len())
                } else {
                    order[by_rank.sample(rng)]
                };
                if !picked.contains(&w) {
                    picked.push(w);
                }
            }
            // Heavy skew can starve the sampler; fill from the topic head.
            for &w in order {
                if picked.len() >= spec.entities_per_tweet {
                    break;
                }
                if !picked.contains(&w) {
                    picked.push(w);
                }
            }
            let words: Vec<String> = picked
                .into_iter()
                .map(|w| {
                    if rng.random_bool(HASHTAG_RATE) {
                        format!("#{}", vocab[w])
                    } else {
                        vocab[w].clone()
                    }
                })
                .collect();
            let n = tweets.len();
            tweets.push(TweetRecord {
                tweet_id: format!("t{:07}", n + 1),
                author_id: e.user_id.clone(),
                text: words.join(" "),
                lang: "en".into(),
                posted_at: EPOCH + 60 * n as i64,
            });
        }
    }
    tweets
}

/// Expected orderings shipped with the popularity-bias fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiasExpectation {
    pub user_id: String,
    pub popular_topic: String,
    pub niche_topic: String,
    /// Expert counting: tied counts, broken by title.
    pub wlw_count_order: Vec<String>,
    /// Interest inference: the niche topic strictly ahead.
    pub em_order: Vec<String>,
}

pub const BIAS_POPULAR_TOPIC: &str = "Politics";
pub const BIAS_NICHE_TOPIC: &str = "Quantum Computing";
pub const BIAS_USER: &str = "u_fixture";
const BIAS_POPULAR_EXPERTS: usize = 100;
const BIAS_NICHE_EXPERTS: usize = 6;
const BIAS_FOLLOWS_EACH: usize = 5;
const BIAS_POPULAR_LISTS: u32 = 50;
const BIAS_NICHE_LISTS: u32 = 12;

/// A user following five experts on a crowded, celebrity-heavy topic and
/// five on a small one. Both get the same expert count, but the popular
/// topic's experts are also followed globally, so following them says less.
pub fn popularity_bias_fixture() -> (SynthCorpus, BiasExpectation) {
    let p = BIAS_POPULAR_TOPIC.to_string();
    let q = BIAS_NICHE_TOPIC.to_string();
    let catalog = TopicCatalog::new([p.clone(), q.clone()], [("QC".to_string(), q.clone())])
        .expect("fixture catalog is valid");

    let mut experts = Vec::new();
    for i in 0..BIAS_POPULAR_EXPERTS {
        // The followed ones are household names.
        let follower_count = if i < BIAS_FOLLOWS_EACH { 10_000_000 } else { 10_000 };
        experts.push(ExpertRecord {
            user_id: format!("p{:03}", i + 1),
            follower_count,
            expertise: BTreeMap::from([(p.clone(), BIAS_POPULAR_LISTS)]),
        });
    }
    for i in 0..BIAS_NICHE_EXPERTS {
        experts.push(ExpertRecord {
            user_id: format!("q{:03}", i + 1),
            follower_count: 1_000,
            expertise: BTreeMap::from([(q.clone(), BIAS_NICHE_LISTS)]),
        });
    }

    let mut lists = Vec::new();
    for j in 0..BIAS_POPULAR_LISTS {
        lists.push(ListRecord {
            list_id: format!("lp{:03}", j + 1),
            owner_id: format!("o{:03}", j + 1),
            name: if j % 2 == 0 { "Politics".into() } else { "PoliticsNews".into() },
            description: "people who cover politics".into(),
            member_ids: experts[..BIAS_POPULAR_EXPERTS].iter().map(|e| e.user_id.clone()).collect(),
        });
    }
    for j in 0..BIAS_NICHE_LISTS {
        lists.push(ListRecord {
            list_id: format!("lq{:03}", j + 1),
            owner_id: format!("o{:03}", j + 1),
            name: match j % 3 {
                0 => "QuantumComputing".into(),
                1 => "Quantum Computing".into(),
                _ => "QC".into(),
            },
            description: String::new(),
            member_ids: experts[BIAS_POPULAR_EXPERTS..].iter().map(|e| e.user_id.clone()).collect(),
        });
    }

    let followed: Vec<&ExpertRecord> = experts[..BIAS_FOLLOWS_EACH]
        .iter()
        .chain(&experts[BIAS_POPULAR_EXPERTS..BIAS_POPULAR_EXPERTS + BIAS_FOLLOWS_EACH])
        .collect();
    let follows = followed
        .iter()
        .map(|e| FollowEdge {
            follower_id: BIAS_USER.into(),
            followee_id: e.user_id.clone(),
        })
        .collect();
    let mut profiles: Vec<UserProfile> = experts
        .iter()
        .map(|e| UserProfile {
            user_id: e.user_id.clone(),
            follower_count: e.follower_count,
        })
        .collect();
    profiles.push(UserProfile {
        user_id: BIAS_USER.into(),
        follower_count: 12,
    });
    let tweets = experts
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let topic = e.expertise.keys().next().expect("one topic");
            let text = if topic == &p {
                "senate vote on the budget bill #politics"
            } else {
                "new qubit error correction result #quantum"
            };
            TweetRecord {
                tweet_id: format!("f{:04}", i + 1),
                author_id: e.user_id.clone(),
                text: text.into(),
                lang: "en".into(),
                posted_at: EPOCH + 60 * i as i64,
            }
        })
        .collect();

    let mut user_truth = BTreeMap::new();
    user_truth.insert(q.clone(), 0.5);
    user_truth.insert(GLOBAL_TOPIC.to_string(), 0.5);
    let corpus = SynthCorpus {
        catalog,
        lists,
        tweets,
        follows,
        profiles,
        experts: experts.into_iter().collect(),
        true_interests: BTreeMap::from([(BIAS_USER.to_string(), user_truth)]),
    };
    let expected = BiasExpectation {
        user_id: BIAS_USER.into(),
        popular_topic: p.clone(),
        niche_topic: q.clone(),
        wlw_count_order: vec![p.clone(), q.clone()],
        em_order: vec![q, p],
    };
    (corpus, expected)
}

/// Writes the fixture corpus and `expected.json` into `dir`.
pub fn write_popularity_bias_fixture(dir: &Path) -> io::Result<()> {
    let (corpus, expected) = popularity_bias_fixture();
    corpus.write(dir)?;
    let mut w = BufWriter::new(File::create(dir.join(EXPECTED_FILE))?);
    serde_json::to_writer_pretty(&mut w, &expected)?;
    writeln!(w)?;
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusPaths, TopicCatalog};
    use crate::expertise::{mine_experts, MinerConfig, TopicMatcher};
    use crate::interest::{build_popularity, infer_from_followings, top_interests, EmConfig};

    fn small() -> SynthSpec {
        SynthSpec::new(4, 12, 20, 30, 7)
    }

    fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
        fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect()
    }

    #[test]
    fn deterministic_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate(&small()).unwrap().write(a.path()).unwrap();
        generate(&small()).unwrap().write(b.path()).unwrap();
        let (da, db) = (read_dir(a.path()), read_dir(b.path()));
        assert_eq!(da.len(), 7);
        assert_eq!(da, db);
        let mut other = small();
        other.seed += 1;
        let c = tempfile::tempdir().unwrap();
        generate(&other).unwrap().write(c.path()).unwrap();
        assert_ne!(read_dir(c.path()), da);
    }

    #[test]
    fn ingests_without_rejects_and_mines_true_counts() {
        let s = generate(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        s.write(dir.path()).unwrap();
        let corpus = Corpus::ingest(&CorpusPaths::in_dir(dir.path()), true).unwrap();
        assert_eq!(corpus.report().total_rejected(), 0);
        let matcher = TopicMatcher::new(corpus.catalog(), &Stopwords::defaults());
        let mined = mine_experts(&corpus, &matcher, MinerConfig::default());
        assert_eq!(mined, s.experts);
    }

    #[test]
    fn single_topic_truth() {
        let mut spec = SynthSpec::new(1, 3, 5, 10, 1);
        spec.global_weight = 0.3;
        let s = generate(&spec).unwrap();
        for i in s.true_interests.values() {
            assert_eq!(i.len(), 2);
            assert!((i["Astronomy"] - 0.7).abs() < 1e-12);
            assert_eq!(i[GLOBAL_TOPIC], 0.3);
        }
    }

    #[test]
    fn spec_errors() {
        let ok = small();
        assert!(ok.validate().is_ok());
        assert_eq!(
            SynthSpec { num_users: 0, ..ok.clone() }.validate(),
            Err(SpecError::Zero("num_users"))
        );
        assert!(matches!(
            SynthSpec { num_topics: 13, ..ok.clone() }.validate(),
            Err(SpecError::Infeasible(_))
        ));
        assert!(matches!(
            SynthSpec {
                entities_per_tweet: 1001,
                ..ok.clone()
            }
            .validate(),
            Err(SpecError::Infeasible(_))
        ));
        assert!(SynthSpec { global_weight: 1.0, ..ok.clone() }.validate().is_err());
        // Draws beyond the expert count are fine: duplicates collapse.
        assert!(SynthSpec { follows_per_user: 500, ..ok }.validate().is_ok());
    }

    #[test]
    fn spec_json_defaults() {
        let s: SynthSpec = serde_json::from_str(
            r#"{"num_topics":2,"num_experts":4,"num_users":3,"follows_per_user":5,"tweets_per_expert":2,
                "vocab_size":50,"entities_per_tweet":3,"topic_entity_skew":1.0,"seed":9}"#,
        )
        .unwrap();
        assert_eq!(s.interests_per_user, 3);
        assert!(serde_json::from_str::<SynthSpec>(r#"{"num_topics":2}"#).is_err());
    }

    #[test]
    fn follow_frequencies_converge() {
        let spec = SynthSpec::new(3, 9, 1, 1, 3);
        let s = generate(&spec).unwrap();
        let sampler = FollowSampler::new(&s.experts);
        let interest: BTreeMap<String, f64> = [("Astronomy", 0.5), ("Baseball", 0.2), ("Biology", 0.1), (GLOBAL_TOPIC, 0.2)]
            .into_iter()
            .map(|(t, w)| (t.to_string(), w))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = sampler.draw(&interest, 10_000, &mut rng);
        for (t, w) in &interest {
            let freq = draws.iter().filter(|(d, _)| d == t).count() as f64 / draws.len() as f64;
            assert!((freq - w).abs() < 0.02, "{t}: {freq} vs {w}");
        }
    }

    #[test]
    fn vocabulary_is_clean() {
        let v = vocabulary(5000);
        let unique: BTreeSet<&String> = v.iter().collect();
        assert_eq!(unique.len(), 5000);
        let stop = Stopwords::defaults();
        assert!(v.iter().all(|w| w.len() == 6 && w.chars().all(|c| c.is_ascii_lowercase()) && !stop.contains(w)));
    }

    #[test]
    fn topic_titles_are_valid() {
        for n in [1, 38, 39, 120] {
            let t = topic_titles(n);
            assert_eq!(t.len(), n);
            assert!(t.iter().all(|s| s.chars().count() <= 25));
            assert!(TopicCatalog::new(t, Vec::<(String, String)>::new()).is_ok());
        }
    }

    #[test]
    fn bias_fixture_splits_the_rankers() {
        let (s, expected) = popularity_bias_fixture();
        let corpus = s.corpus();
        let matcher = TopicMatcher::new(corpus.catalog(), &Stopwords::defaults());
        let mined = mine_experts(&corpus, &matcher, MinerConfig::default());
        assert_eq!(mined, s.experts);
        let followings = corpus.expert_followings(BIAS_USER, &mined).unwrap();
        let wlw = crate::eval::wlw_count_from_followings(BIAS_USER, &followings, &mined, 50).unwrap();
        assert_eq!(wlw, expected.wlw_count_order);
        let pop = build_popularity(&mined).unwrap();
        let iv = infer_from_followings(BIAS_USER, &followings, &pop, &EmConfig::default()).unwrap();
        assert_eq!(top_interests(&iv, 50), expected.em_order);
        assert!(iv.weight(BIAS_NICHE_TOPIC) > iv.weight(BIAS_POPULAR_TOPIC));
    }
}
