//! Ingestion, validation and persistence of the input corpora.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::expertise::ExpertSet;
use crate::ndjson::{self, id, Parsed, ReadError, RejectReason, Rejection};
use crate::text::fold_text;
use crate::GLOBAL_TOPIC;

/// List names are capped by the platform at this many characters.
pub const MAX_LIST_NAME_CHARS: usize = 25;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{file}: {source}")]
    Read {
        file: String,
        #[source]
        source: ReadError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("unknown user {0}")]
    UnknownUser(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListRecord {
    #[serde(deserialize_with = "id::deserialize")]
    pub list_id: String,
    #[serde(deserialize_with = "id::deserialize")]
    pub owner_id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(deserialize_with = "id::list::deserialize")]
    pub member_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    #[serde(deserialize_with = "id::deserialize")]
    pub tweet_id: String,
    #[serde(deserialize_with = "id::deserialize")]
    pub author_id: String,
    pub text: String,
    pub lang: String,
    pub posted_at: i64,
}

impl TweetRecord {
    pub fn is_english(&self) -> bool {
        self.lang == "en"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FollowEdge {
    #[serde(deserialize_with = "id::deserialize")]
    pub follower_id: String,
    #[serde(deserialize_with = "id::deserialize")]
    pub followee_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    #[serde(deserialize_with = "id::deserialize")]
    pub user_id: String,
    pub follower_count: u64,
}

/// Canonical topic titles plus one-hop redirect aliases.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopicCatalog {
    topics: BTreeSet<String>,
    redirects: BTreeMap<String, String>,
}

impl TopicCatalog {
    /// Builds a catalog, rejecting anything that breaks the invariants.
    pub fn new<T, R>(topics: T, redirects: R) -> Result<Self, RejectReason>
    where
        T: IntoIterator,
        T::Item: Into<String>,
        R: IntoIterator<Item = (String, String)>,
    {
        let mut cat = Self::default();
        for t in topics {
            cat.add_topic(t.into())?;
        }
        for (alias, target) in redirects {
            cat.add_redirect(alias, target)?;
        }
        Ok(cat)
    }

    fn add_topic(&mut self, title: String) -> Result<(), RejectReason> {
        if fold_text(&title).is_empty() {
            return Err(RejectReason::Invalid(format!(
                "title {title:?} is empty after normalization"
            )));
        }
        if title == GLOBAL_TOPIC {
            return Err(RejectReason::Invalid(format!(
                "title {title:?} is reserved for the global topic"
            )));
        }
        if !self.topics.insert(title.clone()) {
            return Err(RejectReason::Duplicate(title));
        }
        Ok(())
    }

    fn add_redirect(&mut self, alias: String, target: String) -> Result<(), RejectReason> {
        if !self.topics.contains(&target) {
            return Err(RejectReason::Invalid(format!(
                "redirect target {target:?} is not a canonical topic"
            )));
        }
        if self.topics.contains(&alias) {
            return Err(RejectReason::Invalid(format!(
                "alias {alias:?} is itself a canonical topic"
            )));
        }
        if fold_text(&alias).is_empty() {
            return Err(RejectReason::Invalid(format!(
                "alias {alias:?} is empty after normalization"
            )));
        }
        if self.redirects.contains_key(&alias) {
            return Err(RejectReason::Duplicate(alias));
        }
        self.redirects.insert(alias, target);
        Ok(())
    }

    pub fn topics(&self) -> &BTreeSet<String> {
        &self.topics
    }

    pub fn redirects(&self) -> &BTreeMap<String, String> {
        &self.redirects
    }

    pub fn contains(&self, title: &str) -> bool {
        self.topics.contains(title)
    }

    /// Maps an alias or canonical title to its canonical title.
    pub fn canonical<'a>(&'a self, title: &'a str) -> Option<&'a str> {
        if self.topics.contains(title) {
            Some(title)
        } else {
            self.redirects.get(title).map(String::as_str)
        }
    }
}

fn split_tsv(line: &str) -> Result<(String, String), RejectReason> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 2 {
        return Err(RejectReason::Malformed(format!(
            "expected 2 tab-separated columns, found {}",
            cols.len()
        )));
    }
    let (a, b) = (cols[0].trim(), cols[1].trim());
    if a.is_empty() || b.is_empty() {
        return Err(RejectReason::MissingField("title".into()));
    }
    Ok((a.to_string(), b.to_string()))
}

/// Parses `topics.tsv` (`title<TAB>title`) and `redirects.tsv`
/// (`alias<TAB>canonical_title`).
pub fn read_catalog<A: BufRead, B: BufRead>(
    topics: A,
    redirects: B,
    strict: bool,
) -> Result<(TopicCatalog, Parsed<String>, Parsed<(String, String)>), (&'static str, ReadError)> {
    let mut cat = TopicCatalog::default();
    let t = ndjson::read_lines(topics, strict, |line| {
        let (a, b) = split_tsv(line)?;
        if a != b {
            return Err(RejectReason::Invalid(format!(
                "topic row columns differ: {a:?} vs {b:?}"
            )));
        }
        cat.add_topic(a.clone())?;
        Ok(a)
    })
    .map_err(|e| ("topics.tsv", e))?;
    let r = ndjson::read_lines(redirects, strict, |line| {
        let (alias, target) = split_tsv(line)?;
        cat.add_redirect(alias.clone(), target.clone())?;
        Ok((alias, target))
    })
    .map_err(|e| ("redirects.tsv", e))?;
    Ok((cat, t, r))
}

pub fn read_lists<R: BufRead>(reader: R, strict: bool) -> Result<Parsed<ListRecord>, ReadError> {
    let mut seen = HashSet::new();
    ndjson::read_ndjson(reader, strict, |mut rec: ListRecord| {
        if rec.name.trim().is_empty() {
            return Err(RejectReason::Invalid("name is empty".into()));
        }
        let n = rec.name.chars().count();
        if n > MAX_LIST_NAME_CHARS {
            return Err(RejectReason::Invalid(format!(
                "name has {n} characters, limit is {MAX_LIST_NAME_CHARS}"
            )));
        }
        let mut members = HashSet::new();
        rec.member_ids.retain(|m| members.insert(m.clone()));
        if rec.member_ids.is_empty() {
            return Err(RejectReason::Invalid("member_ids is empty".into()));
        }
        if !seen.insert(rec.list_id.clone()) {
            return Err(RejectReason::Duplicate(format!("list_id {}", rec.list_id)));
        }
        Ok(rec)
    })
}

pub fn read_tweets<R: BufRead>(reader: R, strict: bool) -> Result<Parsed<TweetRecord>, ReadError> {
    let mut seen = HashSet::new();
    ndjson::read_ndjson(reader, strict, |rec: TweetRecord| {
        if rec.text.is_empty() {
            return Err(RejectReason::Invalid("text is empty".into()));
        }
        if !seen.insert(rec.tweet_id.clone()) {
            return Err(RejectReason::Duplicate(format!("tweet_id {}", rec.tweet_id)));
        }
        Ok(rec)
    })
}

pub fn read_follows<R: BufRead>(reader: R, strict: bool) -> Result<Parsed<FollowEdge>, ReadError> {
    let mut seen = HashSet::new();
    ndjson::read_ndjson(reader, strict, |rec: FollowEdge| {
        if rec.follower_id == rec.followee_id {
            return Err(RejectReason::Invalid(format!("self-follow by {}", rec.follower_id)));
        }
        if !seen.insert(rec.clone()) {
            return Err(RejectReason::Duplicate(format!(
                "edge {} -> {}",
                rec.follower_id, rec.followee_id
            )));
        }
        Ok(rec)
    })
}

pub fn read_profiles<R: BufRead>(reader: R, strict: bool) -> Result<Parsed<UserProfile>, ReadError> {
    let mut seen = HashSet::new();
    ndjson::read_ndjson(reader, strict, |rec: UserProfile| {
        if !seen.insert(rec.user_id.clone()) {
            return Err(RejectReason::Duplicate(format!("user_id {}", rec.user_id)));
        }
        Ok(rec)
    })
}

/// Per-file acceptance counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileReport {
    pub file: String,
    pub lines: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub rejections: Vec<Rejection>,
}

impl FileReport {
    fn from_parsed<T>(file: &str, p: &Parsed<T>) -> Self {
        FileReport {
            file: file.to_string(),
            lines: p.lines,
            accepted: p.accepted(),
            rejected: p.rejections.len(),
            rejections: p.rejections.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: Vec<FileReport>,
}

impl IngestReport {
    pub fn total_rejected(&self) -> usize {
        self.files.iter().map(|f| f.rejected).sum()
    }

    pub fn file(&self, name: &str) -> Option<&FileReport> {
        self.files.iter().find(|f| f.file == name)
    }
}

/// Locations of the six raw input files.
#[derive(Debug, Clone)]
pub struct CorpusPaths {
    pub lists: PathBuf,
    pub tweets: PathBuf,
    pub follows: PathBuf,
    pub profiles: PathBuf,
    pub topics: PathBuf,
    pub redirects: PathBuf,
}

impl CorpusPaths {
    /// The standard file names inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        CorpusPaths {
            lists: dir.join(LISTS_FILE),
            tweets: dir.join(TWEETS_FILE),
            follows: dir.join(FOLLOWS_FILE),
            profiles: dir.join(PROFILES_FILE),
            topics: dir.join(TOPICS_FILE),
            redirects: dir.join(REDIRECTS_FILE),
        }
    }
}

pub const LISTS_FILE: &str = "lists.ndjson";
pub const TWEETS_FILE: &str = "tweets.ndjson";
pub const FOLLOWS_FILE: &str = "follows.ndjson";
pub const PROFILES_FILE: &str = "profiles.ndjson";
pub const TOPICS_FILE: &str = "topics.tsv";
pub const REDIRECTS_FILE: &str = "redirects.tsv";
pub const REPORT_FILE: &str = "ingest_report.json";

/// Validated, immutable corpus. Cheap to share behind an `Arc`.
#[derive(Debug, Clone)]
pub struct Corpus {
    catalog: TopicCatalog,
    lists: Vec<ListRecord>,
    tweets: Vec<TweetRecord>,
    follows: Vec<FollowEdge>,
    profiles: Vec<UserProfile>,
    followees: BTreeMap<String, BTreeSet<String>>,
    follower_counts: HashMap<String, u64>,
    report: IngestReport,
}

fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

impl Corpus {
    /// Reads and validates all six inputs.
    pub fn ingest(paths: &CorpusPaths, strict: bool) -> Result<Self, CorpusError> {
        let read_err = |file: &str| {
            let file = file.to_string();
            move |source| CorpusError::Read { file, source }
        };
        let (catalog, topics, redirects) =
            read_catalog(open(&paths.topics)?, open(&paths.redirects)?, strict).map_err(
                |(file, source)| CorpusError::Read {
                    file: file.to_string(),
                    source,
                },
            )?;
        let lists = read_lists(open(&paths.lists)?, strict).map_err(read_err(LISTS_FILE))?;
        let tweets = read_tweets(open(&paths.tweets)?, strict).map_err(read_err(TWEETS_FILE))?;
        let follows = read_follows(open(&paths.follows)?, strict).map_err(read_err(FOLLOWS_FILE))?;
        let profiles =
            read_profiles(open(&paths.profiles)?, strict).map_err(read_err(PROFILES_FILE))?;

        let report = IngestReport {
            files: vec![
                FileReport::from_parsed(TOPICS_FILE, &topics),
                FileReport::from_parsed(REDIRECTS_FILE, &redirects),
                FileReport::from_parsed(LISTS_FILE, &lists),
                FileReport::from_parsed(TWEETS_FILE, &tweets),
                FileReport::from_parsed(FOLLOWS_FILE, &follows),
                FileReport::from_parsed(PROFILES_FILE, &profiles),
            ],
        };
        for f in &report.files {
            log::info!("{}: {} accepted, {} rejected", f.file, f.accepted, f.rejected);
        }
        Ok(Self::from_parts(
            catalog,
            lists.records,
            tweets.records,
            follows.records,
            profiles.records,
            report,
        ))
    }

    /// Assembles a corpus from records that are already valid.
    pub fn from_parts(
        catalog: TopicCatalog,
        lists: Vec<ListRecord>,
        tweets: Vec<TweetRecord>,
        follows: Vec<FollowEdge>,
        profiles: Vec<UserProfile>,
        report: IngestReport,
    ) -> Self {
        let mut followees: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for e in &follows {
            followees
                .entry(e.follower_id.clone())
                .or_default()
                .insert(e.followee_id.clone());
        }
        // A profile with no outgoing edges records an explicit empty following set.
        for p in &profiles {
            followees.entry(p.user_id.clone()).or_default();
        }
        let follower_counts = profiles
            .iter()
            .map(|p| (p.user_id.clone(), p.follower_count))
            .collect();
        Corpus {
            catalog,
            lists,
            tweets,
            follows,
            profiles,
            followees,
            follower_counts,
            report,
        }
    }

    /// Writes the accepted records to `dir` in input order, plus the ingest
    /// report. Identical inputs give byte-identical output.
    pub fn persist(&self, dir: &Path) -> Result<(), CorpusError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let write = |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> io::Result<()>| {
            let path = dir.join(name);
            let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
            f(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))
        };
        write(TOPICS_FILE, &|w| {
            for t in self.catalog.topics() {
                writeln!(w, "{t}\t{t}")?;
            }
            Ok(())
        })?;
        write(REDIRECTS_FILE, &|w| {
            for (a, t) in self.catalog.redirects() {
                writeln!(w, "{a}\t{t}")?;
            }
            Ok(())
        })?;
        write(LISTS_FILE, &|w| ndjson::write_ndjson(w, &self.lists))?;
        write(TWEETS_FILE, &|w| ndjson::write_ndjson(w, &self.tweets))?;
        write(FOLLOWS_FILE, &|w| ndjson::write_ndjson(w, &self.follows))?;
        write(PROFILES_FILE, &|w| ndjson::write_ndjson(w, &self.profiles))?;
        write(REPORT_FILE, &|w| {
            serde_json::to_writer_pretty(&mut *w, &self.report)?;
            w.write_all(b"\n")
        })?;
        Ok(())
    }

    /// Loads a store directory written by [`Corpus::persist`].
    pub fn open(dir: &Path) -> Result<Self, CorpusError> {
        let mut corpus = Self::ingest(&CorpusPaths::in_dir(dir), true)?;
        let report_path = dir.join(REPORT_FILE);
        if let Ok(raw) = fs::read_to_string(&report_path) {
            if let Ok(report) = serde_json::from_str(&raw) {
                corpus.report = report;
            }
        }
        Ok(corpus)
    }

    pub fn catalog(&self) -> &TopicCatalog {
        &self.catalog
    }

    pub fn lists(&self) -> &[ListRecord] {
        &self.lists
    }

    pub fn tweets(&self) -> &[TweetRecord] {
        &self.tweets
    }

    pub fn follows(&self) -> &[FollowEdge] {
        &self.follows
    }

    pub fn profiles(&self) -> &[UserProfile] {
        &self.profiles
    }

    pub fn report(&self) -> &IngestReport {
        &self.report
    }

    /// Users with a recorded following set (follow edges or a profile).
    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.followees.keys().map(String::as_str)
    }

    pub fn is_known_user(&self, user_id: &str) -> bool {
        self.followees.contains_key(user_id)
    }

    pub fn follower_count(&self, user_id: &str) -> Option<u64> {
        self.follower_counts.get(user_id).copied()
    }

    pub fn followees(&self, user_id: &str) -> Result<&BTreeSet<String>, CorpusError> {
        self.followees
            .get(user_id)
            .ok_or_else(|| CorpusError::UnknownUser(user_id.to_string()))
    }

    /// The experts a user follows: `followees(u) ∩ experts`.
    pub fn expert_followings(
        &self,
        user_id: &str,
        experts: &ExpertSet,
    ) -> Result<BTreeSet<String>, CorpusError> {
        Ok(self
            .followees(user_id)?
            .iter()
            .filter(|v| experts.contains(v))
            .cloned()
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expertise::ExpertRecord;

    #[test]
    fn three_valid_lists() {
        let input = r#"{"list_id":"l1","owner_id":"o","name":"News","description":"","member_ids":["a"]}
{"list_id":"l2","owner_id":"o","name":"Music","member_ids":["a","b"]}
{"list_id":3,"owner_id":9,"name":"Jazz","description":"cool","member_ids":[1,2]}
"#;
        let p = read_lists(input.as_bytes(), false).unwrap();
        assert_eq!(p.accepted(), 3);
        assert!(p.rejections.is_empty());
        assert_eq!(p.records[2].member_ids, vec!["1", "2"]);
    }

    #[test]
    fn missing_members_rejected_with_line() {
        let input = r#"{"list_id":"l1","owner_id":"o","name":"News","member_ids":["a"]}
{"list_id":"l2","owner_id":"o","name":"Music"}
{"list_id":"l3","owner_id":"o","name":"Jazz","member_ids":["c"]}
"#;
        let p = read_lists(input.as_bytes(), false).unwrap();
        assert_eq!(p.accepted(), 2);
        assert_eq!(p.rejections.len(), 1);
        assert_eq!(p.rejections[0].line, 2);
        assert_eq!(
            p.rejections[0].reason,
            RejectReason::MissingField("member_ids".into())
        );
    }

    #[test]
    fn list_invariants() {
        let long = "x".repeat(26);
        let input = format!(
            "{{\"list_id\":\"l1\",\"owner_id\":\"o\",\"name\":\"{long}\",\"member_ids\":[\"a\"]}}\n\
             {{\"list_id\":\"l2\",\"owner_id\":\"o\",\"name\":\"ok\",\"member_ids\":[]}}\n\
             {{\"list_id\":\"l3\",\"owner_id\":\"o\",\"name\":\"\",\"member_ids\":[\"a\"]}}\n"
        );
        let p = read_lists(input.as_bytes(), false).unwrap();
        assert_eq!(p.accepted(), 0);
        assert_eq!(p.rejections.len(), 3);
    }

    #[test]
    fn duplicate_tweet_id() {
        let line = |id: &str| {
            format!(r#"{{"tweet_id":"{id}","author_id":"a","text":"hi","lang":"en","posted_at":1}}"#)
        };
        let input = [line("t1"), line("t2"), line("t3"), line("t1")].join("\n");
        let p = read_tweets(input.as_bytes(), false).unwrap();
        assert_eq!(p.accepted(), 3);
        assert_eq!(p.rejections.len(), 1);
        assert_eq!(p.rejections[0].line, 4);
        assert!(matches!(p.rejections[0].reason, RejectReason::Duplicate(_)));
    }

    #[test]
    fn follow_invariants() {
        let input = r#"{"follower_id":"a","followee_id":"b"}
{"follower_id":"a","followee_id":"a"}
{"follower_id":"a","followee_id":"b"}
"#;
        let p = read_follows(input.as_bytes(), false).unwrap();
        assert_eq!(p.accepted(), 1);
        assert_eq!(p.rejections.len(), 2);
    }

    #[test]
    fn negative_follower_count_rejected() {
        let p = read_profiles(r#"{"user_id":"a","follower_count":-3}"#.as_bytes(), false).unwrap();
        assert_eq!(p.accepted(), 0);
    }

    #[test]
    fn catalog_validation() {
        let topics = "New York\tNew York\nCelebrity\tCelebrity\n!!!\t!!!\nA\tB\nCelebrity\tCelebrity\n";
        let redirects = "celeb\tCelebrity\nNYC\tNew York\nfoo\tMissing\nNew York\tCelebrity\n";
        let (cat, t, r) = read_catalog(topics.as_bytes(), redirects.as_bytes(), false).unwrap();
        assert_eq!(t.accepted(), 2);
        assert_eq!(t.rejections.len(), 3);
        assert_eq!(r.accepted(), 2);
        assert_eq!(r.rejections.len(), 2);
        assert_eq!(cat.canonical("celeb"), Some("Celebrity"));
        assert_eq!(cat.canonical("New York"), Some("New York"));
        for target in cat.redirects().values() {
            assert!(cat.contains(target));
        }
    }

    fn tiny_corpus() -> Corpus {
        let follows = vec![
            FollowEdge {
                follower_id: "u".into(),
                followee_id: "a".into(),
            },
            FollowEdge {
                follower_id: "u".into(),
                followee_id: "b".into(),
            },
            FollowEdge {
                follower_id: "u".into(),
                followee_id: "c".into(),
            },
        ];
        let profiles = vec![UserProfile {
            user_id: "lonely".into(),
            follower_count: 0,
        }];
        Corpus::from_parts(
            TopicCatalog::default(),
            vec![],
            vec![],
            follows,
            profiles,
            IngestReport::default(),
        )
    }

    fn experts(ids: &[&str]) -> ExpertSet {
        ids.iter()
            .map(|id| ExpertRecord {
                user_id: id.to_string(),
                follower_count: 0,
                expertise: [("T".to_string(), 10)].into_iter().collect(),
            })
            .collect()
    }

    #[test]
    fn expert_followings_cases() {
        let c = tiny_corpus();
        let ex = experts(&["b", "c", "d"]);
        let got = c.expert_followings("u", &ex).unwrap();
        assert_eq!(got, ["b", "c"].iter().map(|s| s.to_string()).collect());
        assert!(c.expert_followings("lonely", &ex).unwrap().is_empty());
        assert!(matches!(
            c.expert_followings("ghost", &ex),
            Err(CorpusError::UnknownUser(_))
        ));
    }
}
