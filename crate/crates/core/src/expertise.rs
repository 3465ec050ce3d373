//! Mining topical experts from List memberships.
//!
//! A List's name and description are normalized and matched against the
//! topic catalog (titles and redirect aliases). When one matched query is a
//! whole-word substring of another, only the longer one is kept. Each List
//! member then earns one count per matched topic; users reaching the
//! threshold on a topic are experts on it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TopicCatalog};
use crate::ndjson::{self, id, Parsed, ReadError, RejectReason};
use crate::text::{fold_text, split_camel_case, tokens, Stopwords};

pub const DEFAULT_EXPERT_THRESHOLD: u32 = 10;
pub const DEFAULT_MAX_TOPICS: usize = 50;

/// Normalizes a List's name and description into one folded token string.
/// Only the name is CamelCase-split.
pub fn normalize_list_text(name: &str, description: &str) -> String {
    let name = fold_text(&split_camel_case(name));
    let desc = fold_text(description);
    match (name.is_empty(), desc.is_empty()) {
        (_, true) => name,
        (true, false) => desc,
        (false, false) => format!("{name} {desc}"),
    }
}

/// Precomputed catalog queries for fast matching.
#[derive(Debug, Clone)]
pub struct TopicMatcher {
    /// Folded query -> canonical topics it stands for.
    queries: HashMap<String, BTreeSet<String>>,
    max_query_tokens: usize,
}

impl TopicMatcher {
    pub fn new(catalog: &TopicCatalog, stopwords: &Stopwords) -> Self {
        let mut queries: HashMap<String, BTreeSet<String>> = HashMap::new();
        let mut max_query_tokens = 0;
        let mut add = |query: String, canonical: &str| {
            if stopwords.covers(&query) {
                return;
            }
            max_query_tokens = max_query_tokens.max(tokens(&query).count());
            queries.entry(query).or_default().insert(canonical.to_string());
        };
        for t in catalog.topics() {
            add(fold_text(t), t);
        }
        for (alias, target) in catalog.redirects() {
            add(fold_text(alias), target);
        }
        TopicMatcher {
            queries,
            max_query_tokens,
        }
    }

    pub fn num_queries(&self) -> usize {
        self.queries.len()
    }

    /// Queries occurring as whole-word substrings of `folded`, after the
    /// longest-match merge.
    pub fn matched_queries(&self, folded: &str) -> BTreeSet<&str> {
        let toks: Vec<&str> = tokens(folded).collect();
        let mut hits: BTreeSet<&str> = BTreeSet::new();
        let mut gram = String::new();
        for start in 0..toks.len() {
            gram.clear();
            for len in 1..=self.max_query_tokens.min(toks.len() - start) {
                if len > 1 {
                    gram.push(' ');
                }
                gram.push_str(toks[start + len - 1]);
                if let Some((q, _)) = self.queries.get_key_value(gram.as_str()) {
                    hits.insert(q.as_str());
                }
            }
        }
        let kept: BTreeSet<&str> = hits
            .iter()
            .copied()
            .filter(|q| !hits.iter().any(|other| other != q && contains_phrase(other, q)))
            .collect();
        kept
    }

    /// Canonical topics matched by an already normalized text.
    pub fn match_text(&self, folded: &str) -> BTreeSet<String> {
        self.matched_queries(folded)
            .into_iter()
            .flat_map(|q| self.queries[q].iter().cloned())
            .collect()
    }

    /// Canonical topics matched by a List.
    pub fn match_list(&self, name: &str, description: &str) -> BTreeSet<String> {
        self.match_text(&normalize_list_text(name, description))
    }
}

/// True when `needle` occurs in `haystack` on token boundaries.
fn contains_phrase(haystack: &str, needle: &str) -> bool {
    let h: Vec<&str> = tokens(haystack).collect();
    let n: Vec<&str> = tokens(needle).collect();
    !n.is_empty() && n.len() <= h.len() && h.windows(n.len()).any(|w| w == n.as_slice())
}

/// One-shot convenience over [`TopicMatcher`].
pub fn match_topics(normalized_text: &str, catalog: &TopicCatalog, stopwords: &Stopwords) -> BTreeSet<String> {
    TopicMatcher::new(catalog, stopwords).match_text(normalized_text)
}

/// A user with topical expertise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertRecord {
    #[serde(deserialize_with = "id::deserialize")]
    pub user_id: String,
    pub follower_count: u64,
    /// Topic -> number of distinct Lists on that topic that include the user.
    pub expertise: BTreeMap<String, u32>,
}

/// Experts keyed by user id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpertSet {
    records: BTreeMap<String, ExpertRecord>,
}

impl FromIterator<ExpertRecord> for ExpertSet {
    fn from_iter<I: IntoIterator<Item = ExpertRecord>>(iter: I) -> Self {
        ExpertSet {
            records: iter.into_iter().map(|r| (r.user_id.clone(), r)).collect(),
        }
    }
}

impl ExpertSet {
    pub fn contains(&self, user_id: &str) -> bool {
        self.records.contains_key(user_id)
    }

    pub fn get(&self, user_id: &str) -> Option<&ExpertRecord> {
        self.records.get(user_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ExpertRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// All topics that have at least one expert.
    pub fn topics(&self) -> BTreeSet<&str> {
        self.iter()
            .flat_map(|r| r.expertise.keys().map(String::as_str))
            .collect()
    }

    /// Reads `experts.ndjson`. Records with an empty expertise map or a zero
    /// count are rejected.
    pub fn read<R: BufRead>(reader: R, strict: bool) -> Result<(Self, Parsed<()>), ReadError> {
        let mut records = BTreeMap::new();
        let parsed = ndjson::read_ndjson(reader, strict, |rec: ExpertRecord| {
            if rec.expertise.is_empty() {
                return Err(RejectReason::Invalid("expertise is empty".into()));
            }
            if let Some((t, _)) = rec.expertise.iter().find(|(_, &n)| n == 0) {
                return Err(RejectReason::Invalid(format!("zero count for topic {t:?}")));
            }
            if records.contains_key(&rec.user_id) {
                return Err(RejectReason::Duplicate(format!("user_id {}", rec.user_id)));
            }
            records.insert(rec.user_id.clone(), rec);
            Ok(())
        })?;
        Ok((ExpertSet { records }, parsed))
    }

    /// Writes `experts.ndjson`, sorted by user id.
    pub fn write<W: Write>(&self, w: W) -> io::Result<()> {
        ndjson::write_ndjson(w, self.records.values())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinerConfig {
    pub expert_threshold: u32,
    pub max_topics: usize,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            expert_threshold: DEFAULT_EXPERT_THRESHOLD,
            max_topics: DEFAULT_MAX_TOPICS,
        }
    }
}

/// Computes per-user topical expertise from List memberships.
pub fn mine_experts(corpus: &Corpus, matcher: &TopicMatcher, config: MinerConfig) -> ExpertSet {
    let per_list: Vec<(usize, BTreeSet<String>)> = corpus
        .lists()
        .par_iter()
        .enumerate()
        .map(|(i, l)| (i, matcher.match_list(&l.name, &l.description)))
        .filter(|(_, topics)| !topics.is_empty())
        .collect();

    let mut counts: BTreeMap<&str, BTreeMap<&str, u32>> = BTreeMap::new();
    for (i, topics) in &per_list {
        for member in &corpus.lists()[*i].member_ids {
            let entry = counts.entry(member.as_str()).or_default();
            for t in topics {
                *entry.entry(t.as_str()).or_default() += 1;
            }
        }
    }
    counts
        .into_iter()
        .filter_map(|(user, topics)| {
            let expertise = select_topics(topics, config);
            (!expertise.is_empty()).then(|| ExpertRecord {
                user_id: user.to_string(),
                follower_count: corpus.follower_count(user).unwrap_or(0),
                expertise,
            })
        })
        .collect()
}

/// Keeps topics at or above the threshold, then the `max_topics` largest
/// counts (ties by title).
fn select_topics(topics: BTreeMap<&str, u32>, config: MinerConfig) -> BTreeMap<String, u32> {
    let mut kept: Vec<(&str, u32)> = topics
        .into_iter()
        .filter(|&(_, n)| n >= config.expert_threshold.max(1))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    kept.truncate(config.max_topics);
    kept.into_iter().map(|(t, n)| (t.to_string(), n)).collect()
}
