//! Per-user recommendation lists assembled from topical rankings.
//!
//! For each of the user's top `M` topics the index ranks the candidate
//! tweets; each topical list is deduplicated, the lists are interleaved
//! round-robin in interest order, and the merged list is deduplicated again.
//! Every item carries the topic that selected it as its explanation.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::{Arc, Mutex};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::bim::{EntityBag, Ranked, TopicModelIndex, DEFAULT_TOP_N};
use crate::interest::{top_interests, InterestError, InterestVector};
use crate::ndjson;

pub const DEFAULT_MAX_TOPICS: usize = 50;
pub const DEFAULT_JACCARD_THRESHOLD: f64 = 0.7;
pub const DEFAULT_LIMIT: usize = 10;

/// Something with a tweet id and an entity set.
pub trait Candidate {
    fn tweet_id(&self) -> &str;
    fn entities(&self) -> &BTreeSet<String>;
}

impl Candidate for EntityBag {
    fn tweet_id(&self) -> &str {
        &self.tweet_id
    }

    fn entities(&self) -> &BTreeSet<String> {
        &self.entities
    }
}

impl Candidate for Ranked<'_> {
    fn tweet_id(&self) -> &str {
        &self.bag.tweet_id
    }

    fn entities(&self) -> &BTreeSet<String> {
        &self.bag.entities
    }
}

impl<T: Candidate + ?Sized> Candidate for &T {
    fn tweet_id(&self) -> &str {
        (**self).tweet_id()
    }

    fn entities(&self) -> &BTreeSet<String> {
        (**self).entities()
    }
}

/// |a ∩ b| / |a ∪ b|, with two empty sets counting as identical.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Keeps an item iff its similarity to every earlier kept item is below
/// `threshold`. Order is preserved.
pub fn dedup_list<T: Candidate>(ranked: Vec<T>, threshold: f64) -> Vec<T> {
    let mut kept: Vec<T> = Vec::with_capacity(ranked.len());
    for item in ranked {
        if kept.iter().all(|k| jaccard(k.entities(), item.entities()) < threshold) {
            kept.push(item);
        }
    }
    kept
}

/// Interleaves the lists: all first elements in list order, then all second
/// elements, and so on. A tweet id already emitted is skipped. Returns the
/// source list index with each item.
pub fn round_robin<T: Candidate>(lists: Vec<Vec<T>>) -> Vec<(usize, T)> {
    let total: usize = lists.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(total);
    let mut seen: HashSet<String> = HashSet::with_capacity(total);
    let mut iters: Vec<_> = lists.into_iter().map(Vec::into_iter).collect();
    let mut live = true;
    while live {
        live = false;
        for (i, it) in iters.iter_mut().enumerate() {
            if let Some(item) = it.next() {
                live = true;
                if seen.insert(item.tweet_id().to_string()) {
                    out.push((i, item));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendationItem {
    pub tweet_id: String,
    /// Canonical title of the topic that selected this tweet.
    pub topic: String,
    /// 1-based rank of the tweet in its topic's scored list.
    pub topical_rank: usize,
    /// 1-based position in the final list.
    pub final_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub user_id: String,
    pub items: Vec<RecommendationItem>,
    pub generated_at: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecommendConfig {
    /// Number of interest topics consulted (M).
    pub max_topics: usize,
    /// Tweets scored per topic (N).
    pub top_n: usize,
    pub threshold: f64,
    pub limit: usize,
}

impl Default for RecommendConfig {
    fn default() -> Self {
        RecommendConfig {
            max_topics: DEFAULT_MAX_TOPICS,
            top_n: DEFAULT_TOP_N,
            threshold: DEFAULT_JACCARD_THRESHOLD,
            limit: DEFAULT_LIMIT,
        }
    }
}

/// Topic, `top_n` and threshold bits.
type ListKey = (String, usize, u64);
/// `(topical_rank, candidate position)` pairs.
type TopicalList = Arc<[(usize, usize)]>;

/// Deduplicated topical lists, shared across users.
///
/// A topic's list depends only on the index, the candidates, `top_n` and the
/// threshold, so it is computed once per topic and parameter pair. Entries
/// are `(topical_rank, candidate position)`. A cache must only be used with
/// one index and candidate slice.
#[derive(Debug, Default)]
pub struct TopicListCache {
    lists: Mutex<HashMap<ListKey, TopicalList>>,
}

impl TopicListCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn topical(
        &self,
        topic: &str,
        index: &TopicModelIndex,
        candidates: &[EntityBag],
        config: &RecommendConfig,
    ) -> TopicalList {
        let key = (topic.to_string(), config.top_n, config.threshold.to_bits());
        if let Some(hit) = self.lists.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Arc::clone(hit);
        }
        let list: TopicalList = if index.has_topic(topic) {
            let ranked: Vec<(usize, (usize, &EntityBag))> = index
                .top_positions(topic, candidates, config.top_n)
                .into_iter()
                .enumerate()
                .map(|(i, (pos, _))| (i + 1, (pos, &candidates[pos])))
                .collect();
            dedup_list(ranked, config.threshold)
                .into_iter()
                .map(|(rank, (pos, _))| (rank, pos))
                .collect()
        } else {
            Arc::from([])
        };
        self.lists
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(key)
            .or_insert(list)
            .clone()
    }
}

/// Recommendations for a user from their inferred interests.
pub fn recommend(
    interest: &InterestVector,
    index: &TopicModelIndex,
    candidates: &[EntityBag],
    config: &RecommendConfig,
    generated_at: &str,
) -> Result<RecommendationList, InterestError> {
    recommend_cached(interest, index, candidates, config, generated_at, &TopicListCache::new())
}

/// [`recommend`] reusing topical lists from `cache`.
pub fn recommend_cached(
    interest: &InterestVector,
    index: &TopicModelIndex,
    candidates: &[EntityBag],
    config: &RecommendConfig,
    generated_at: &str,
    cache: &TopicListCache,
) -> Result<RecommendationList, InterestError> {
    let topics = top_interests(interest, config.max_topics);
    if topics.is_empty() {
        return Err(InterestError::NoExpertFollowings(interest.user_id.clone()));
    }
    Ok(recommend_for_topics_cached(
        &interest.user_id,
        &topics,
        index,
        candidates,
        config,
        generated_at,
        cache,
    ))
}

/// Recommendations for an explicit, already ordered topic list.
///
/// Topics the index has never seen contribute nothing: with no expert tweets
/// every candidate would tie at the neutral score.
pub fn recommend_for_topics(
    user_id: &str,
    topics: &[String],
    index: &TopicModelIndex,
    candidates: &[EntityBag],
    config: &RecommendConfig,
    generated_at: &str,
) -> RecommendationList {
    recommend_for_topics_cached(user_id, topics, index, candidates, config, generated_at, &TopicListCache::new())
}

/// [`recommend_for_topics`] reusing topical lists from `cache`.
pub fn recommend_for_topics_cached(
    user_id: &str,
    topics: &[String],
    index: &TopicModelIndex,
    candidates: &[EntityBag],
    config: &RecommendConfig,
    generated_at: &str,
    cache: &TopicListCache,
) -> RecommendationList {
    let lists: Vec<Vec<(usize, &EntityBag)>> = topics
        .iter()
        .map(|t| {
            cache
                .topical(t, index, candidates, config)
                .iter()
                .map(|&(rank, pos)| (rank, &candidates[pos]))
                .collect()
        })
        .collect();
    let merged: Vec<(usize, (usize, &EntityBag))> = round_robin(lists);
    // Whether an item survives depends only on the items before it, so the
    // first `limit` survivors are final.
    let mut kept: Vec<(usize, (usize, &EntityBag))> = Vec::with_capacity(config.limit);
    for item in merged {
        if kept.len() == config.limit {
            break;
        }
        if kept.iter().all(|k| jaccard(k.entities(), item.entities()) < config.threshold) {
            kept.push(item);
        }
    }
    let items = kept
        .into_iter()
        .enumerate()
        .map(|(i, (topic, (rank, bag)))| RecommendationItem {
            tweet_id: bag.tweet_id.clone(),
            topic: topics[topic].clone(),
            topical_rank: rank,
            final_rank: i + 1,
        })
        .collect();
    RecommendationList {
        user_id: user_id.to_string(),
        items,
        generated_at: generated_at.to_string(),
    }
}

impl<T: Candidate> Candidate for (usize, T) {
    fn tweet_id(&self) -> &str {
        self.1.tweet_id()
    }

    fn entities(&self) -> &BTreeSet<String> {
        self.1.entities()
    }
}

pub fn write_recommendations<'a, W: Write>(
    w: W,
    lists: impl IntoIterator<Item = &'a RecommendationList>,
) -> io::Result<()> {
    ndjson::write_ndjson(w, lists)
}
