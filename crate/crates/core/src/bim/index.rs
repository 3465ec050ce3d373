use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use rayon::prelude::*;

use super::{entity_topic_factor, truncated_log_product, BimParams, EntityBag, PairCounts};

/// Count accumulator. Builders over disjoint shards merge by addition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IndexBuilder {
    n: u64,
    n_e: HashMap<String, u64>,
    n_t: HashMap<String, u64>,
    n_et: HashMap<String, HashMap<String, u64>>,
}

impl IndexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counts one tweet. Every topic of the author gets the tweet.
    pub fn add<'a, I>(&mut self, bag: &EntityBag, author_topics: I)
    where
        I: IntoIterator<Item = &'a str>,
    {
        self.n += 1;
        for e in &bag.entities {
            *self.n_e.entry(e.clone()).or_default() += 1;
        }
        let topics: BTreeSet<&str> = author_topics.into_iter().collect();
        for t in topics {
            *self.n_t.entry(t.to_string()).or_default() += 1;
            let row = self.n_et.entry(t.to_string()).or_default();
            for e in &bag.entities {
                *row.entry(e.clone()).or_default() += 1;
            }
        }
    }

    pub fn merge(mut self, other: IndexBuilder) -> IndexBuilder {
        self.n += other.n;
        for (e, c) in other.n_e {
            *self.n_e.entry(e).or_default() += c;
        }
        for (t, c) in other.n_t {
            *self.n_t.entry(t).or_default() += c;
        }
        for (t, row) in other.n_et {
            let mine = self.n_et.entry(t).or_default();
            for (e, c) in row {
                *mine.entry(e).or_default() += c;
            }
        }
        self
    }

    pub fn finish(self, params: BimParams) -> TopicModelIndex {
        let mut entities: Vec<(String, u64)> = self.n_e.into_iter().collect();
        entities.sort();
        let mut topics: Vec<(String, u64)> = self.n_t.into_iter().collect();
        topics.sort();
        let entity_ids: HashMap<String, u32> = entities
            .iter()
            .enumerate()
            .map(|(i, (e, _))| (e.clone(), i as u32))
            .collect();
        let topic_ids: HashMap<String, u32> = topics
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i as u32))
            .collect();
        let mut n_et = HashMap::new();
        for (t, row) in self.n_et {
            let tid = topic_ids[&t];
            for (e, c) in row {
                n_et.insert((entity_ids[&e], tid), c);
            }
        }
        TopicModelIndex {
            params,
            n: self.n,
            entity_ids,
            entities: entities.iter().map(|(e, _)| e.clone()).collect(),
            n_e: entities.iter().map(|(_, c)| *c).collect(),
            topic_ids,
            topics: topics.iter().map(|(t, _)| t.clone()).collect(),
            n_t: topics.iter().map(|(_, c)| *c).collect(),
            n_et,
            log_factors: Vec::new(),
            lookups: AtomicU64::new(0),
        }
        .with_factor_tables()
    }
}

/// Trains count tables in one pass, sharded across threads.
pub fn train_index<'a, I>(tweets: I, params: BimParams) -> TopicModelIndex
where
    I: IntoParallelIterator<Item = (&'a EntityBag, &'a [String])>,
{
    tweets
        .into_par_iter()
        .fold(IndexBuilder::new, |mut b, (bag, topics)| {
            b.add(bag, topics.iter().map(String::as_str));
            b
        })
        .reduce(IndexBuilder::new, IndexBuilder::merge)
        .finish(params)
}

/// Trained count tables plus scoring parameters.
///
/// Entities and topics are numbered in sorted order. The index counts every
/// `s(e,t)` evaluation so callers can check that scoring a tweet only looks
/// at that tweet's entities.
pub struct TopicModelIndex {
    pub(super) params: BimParams,
    pub(super) n: u64,
    pub(super) entity_ids: HashMap<String, u32>,
    pub(super) entities: Vec<String>,
    pub(super) n_e: Vec<u64>,
    pub(super) topic_ids: HashMap<String, u32>,
    pub(super) topics: Vec<String>,
    pub(super) n_t: Vec<u64>,
    pub(super) n_et: HashMap<(u32, u32), u64>,
    /// Per topic, `ln s(e,t)` for every entity whose factor is not 1.
    pub(super) log_factors: Vec<HashMap<String, f64>>,
    pub(super) lookups: AtomicU64,
}

impl fmt::Debug for TopicModelIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TopicModelIndex")
            .field("params", &self.params)
            .field("n", &self.n)
            .field("entities", &self.entities.len())
            .field("topics", &self.topics.len())
            .field("pairs", &self.n_et.len())
            .finish()
    }
}

impl PartialEq for TopicModelIndex {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.n == other.n
            && self.entities == other.entities
            && self.n_e == other.n_e
            && self.topics == other.topics
            && self.n_t == other.n_t
            && self.n_et == other.n_et
    }
}

/// One scored candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranked<'a> {
    pub bag: &'a EntityBag,
    pub log_score: f64,
}

impl Ranked<'_> {
    pub fn score(&self) -> f64 {
        self.log_score.exp()
    }
}

impl TopicModelIndex {
    pub fn params(&self) -> &BimParams {
        &self.params
    }

    /// Same counts, different scoring parameters.
    pub fn with_params(mut self, params: BimParams) -> Self {
        self.params = params;
        self.with_factor_tables()
    }

    /// Rebuilds the per-topic tables of non-neutral log factors, so scoring
    /// probes one table per entity whose size is bounded by that topic's
    /// gated entities rather than by the vocabulary.
    pub(super) fn with_factor_tables(mut self) -> Self {
        let mut tables: Vec<HashMap<String, f64>> = vec![HashMap::new(); self.topics.len()];
        for (&(e, t), &n_et) in &self.n_et {
            let s = entity_topic_factor(
                PairCounts {
                    n: self.n,
                    n_e: self.n_e[e as usize],
                    n_t: self.n_t[t as usize],
                    n_et,
                },
                &self.params,
            );
            if s != 1.0 {
                tables[t as usize].insert(self.entities[e as usize].clone(), s.ln());
            }
        }
        self.log_factors = tables;
        self
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    pub fn has_topic(&self, topic: &str) -> bool {
        self.topic_ids.contains_key(topic)
    }

    pub fn n_e(&self, entity: &str) -> u64 {
        self.entity_ids
            .get(entity)
            .map_or(0, |&i| self.n_e[i as usize])
    }

    pub fn n_t(&self, topic: &str) -> u64 {
        self.topic_ids.get(topic).map_or(0, |&i| self.n_t[i as usize])
    }

    pub fn n_et(&self, entity: &str, topic: &str) -> u64 {
        match (self.entity_ids.get(entity), self.topic_ids.get(topic)) {
            (Some(&e), Some(&t)) => self.n_et.get(&(e, t)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn counts(&self, entity: &str, topic: &str) -> PairCounts {
        PairCounts {
            n: self.n,
            n_e: self.n_e(entity),
            n_t: self.n_t(topic),
            n_et: self.n_et(entity, topic),
        }
    }

    /// Number of `s(e,t)` evaluations since the last reset.
    pub fn lookup_count(&self) -> u64 {
        self.lookups.load(AtomicOrdering::Relaxed)
    }

    pub fn reset_lookup_count(&self) {
        self.lookups.store(0, AtomicOrdering::Relaxed);
    }

    fn factor_by_id(&self, entity: Option<u32>, topic: Option<u32>) -> f64 {
        self.lookups.fetch_add(1, AtomicOrdering::Relaxed);
        let Some(e) = entity else { return 1.0 };
        let n_e = self.n_e[e as usize];
        let (n_t, n_et) = match topic {
            Some(t) => (
                self.n_t[t as usize],
                self.n_et.get(&(e, t)).copied().unwrap_or(0),
            ),
            None => (0, 0),
        };
        entity_topic_factor(
            PairCounts {
                n: self.n,
                n_e,
                n_t,
                n_et,
            },
            &self.params,
        )
    }

    /// `s(e,t)` for one entity.
    pub fn entity_topic_score(&self, entity: &str, topic: &str) -> f64 {
        self.factor_by_id(
            self.entity_ids.get(entity).copied(),
            self.topic_ids.get(topic).copied(),
        )
    }

    fn log_score_with(&self, bag: &EntityBag, topic: Option<u32>, buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        self.lookups.fetch_add(bag.len() as u64, AtomicOrdering::Relaxed);
        if let Some(table) = topic.map(|t| &self.log_factors[t as usize]) {
            buf.extend(bag.entities.iter().map(|e| table.get(e).copied().unwrap_or(0.0)));
        } else {
            buf.resize(bag.len(), 0.0);
        }
        truncated_log_product(buf, self.params.nu)
    }

    /// log of the truncated rank product.
    pub fn log_rank_score(&self, bag: &EntityBag, topic: &str) -> f64 {
        let mut buf = Vec::with_capacity(bag.len());
        self.log_score_with(bag, self.topic_ids.get(topic).copied(), &mut buf)
    }

    /// Product of the `ν` largest `s(e,t)` over the bag; 1 for an empty bag.
    pub fn rank_score(&self, bag: &EntityBag, topic: &str) -> f64 {
        self.log_rank_score(bag, topic).exp()
    }

    /// The `top_n` best candidates for `topic`: descending score, ties by
    /// ascending tweet id.
    pub fn top_tweets<'a>(&self, topic: &str, candidates: &'a [EntityBag], top_n: usize) -> Vec<Ranked<'a>> {
        self.top_positions(topic, candidates, top_n)
            .into_iter()
            .map(|(i, log_score)| Ranked {
                bag: &candidates[i],
                log_score,
            })
            .collect()
    }

    /// [`top_tweets`](Self::top_tweets) as `(position in candidates, log score)`.
    pub fn top_positions(&self, topic: &str, candidates: &[EntityBag], top_n: usize) -> Vec<(usize, f64)> {
        if top_n == 0 {
            return Vec::new();
        }
        let tid = self.topic_ids.get(topic).copied();
        let mut ranked: Vec<(usize, f64)> = candidates
            .par_iter()
            .enumerate()
            .map_init(Vec::new, |buf, (i, bag)| (i, self.log_score_with(bag, tid, buf)))
            .collect();
        let order = |a: &(usize, f64), b: &(usize, f64)| -> Ordering {
            b.1.total_cmp(&a.1)
                .then_with(|| candidates[a.0].tweet_id.cmp(&candidates[b.0].tweet_id))
        };
        if top_n < ranked.len() {
            ranked.select_nth_unstable_by(top_n - 1, order);
            ranked.truncate(top_n);
        }
        ranked.sort_by(order);
        ranked
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bag(id: &str, es: &[&str]) -> EntityBag {
        EntityBag::new(id, es.iter().copied())
    }

    #[test]
    fn single_tweet_counts() {
        let mut b = IndexBuilder::new();
        b.add(&bag("1", &["a", "b"]), ["t"]);
        let idx = b.finish(BimParams::default());
        assert_eq!(idx.n(), 1);
        assert_eq!(idx.n_e("a"), 1);
        assert_eq!(idx.n_e("b"), 1);
        assert_eq!(idx.n_t("t"), 1);
        assert_eq!(idx.n_et("a", "t"), 1);
        assert_eq!(idx.n_et("b", "t"), 1);
    }

    #[test]
    fn empty_corpus() {
        let idx = IndexBuilder::new().finish(BimParams::default());
        assert_eq!(idx.n(), 0);
        assert_eq!(idx.num_entities(), 0);
        assert_eq!(idx.n_t("t"), 0);
        assert_eq!(idx.rank_score(&bag("x", &["a"]), "t"), 1.0);
    }

    #[test]
    fn multi_topic_author() {
        let mut b = IndexBuilder::new();
        b.add(&bag("1", &["a"]), ["t1", "t2", "t1"]);
        let idx = b.finish(BimParams::default());
        assert_eq!(idx.n(), 1);
        assert_eq!(idx.n_t("t1"), 1);
        assert_eq!(idx.n_t("t2"), 1);
        assert_eq!(idx.n_et("a", "t2"), 1);
    }

    #[test]
    fn sharded_training_matches_sequential() {
        let bags: Vec<EntityBag> = (0..200)
            .map(|i| bag(&format!("{i:03}"), &[["a", "b", "c"][i % 3], ["x", "y"][i % 2]]))
            .collect();
        let topics: Vec<Vec<String>> = (0..200)
            .map(|i| vec![format!("t{}", i % 4)])
            .collect();
        let mut seq = IndexBuilder::new();
        for (b, t) in bags.iter().zip(&topics) {
            seq.add(b, t.iter().map(String::as_str));
        }
        let seq = seq.finish(BimParams::default());
        let pairs: Vec<(&EntityBag, &[String])> =
            bags.iter().zip(topics.iter().map(Vec::as_slice)).collect();
        let par = train_index(pairs, BimParams::default());
        assert_eq!(seq, par);
    }

    #[test]
    fn lookups_equal_bag_size() {
        let mut b = IndexBuilder::new();
        for i in 0..10 {
            b.add(&bag(&i.to_string(), &["a", "b", "c"]), ["t"]);
        }
        let idx = b.finish(BimParams::default());
        idx.reset_lookup_count();
        idx.rank_score(&bag("q", &["a", "b", "c", "zzz"]), "t");
        assert_eq!(idx.lookup_count(), 4);
        idx.reset_lookup_count();
        assert_eq!(idx.rank_score(&bag("q", &[]), "t"), 1.0);
        assert_eq!(idx.lookup_count(), 0);
    }

    #[test]
    fn top_tweets_order_and_ties() {
        let mut b = IndexBuilder::new();
        for i in 0..6 {
            b.add(&bag(&format!("s{i}"), &["hot"]), ["t"]);
        }
        for i in 0..6 {
            b.add(&bag(&format!("o{i}"), &["cold"]), ["u"]);
        }
        let idx = b.finish(BimParams::default());
        let cands = vec![bag("c", &["cold"]), bag("b", &["hot"]), bag("a", &["hot"])];
        let top = idx.top_tweets("t", &cands, 10);
        let ids: Vec<&str> = top.iter().map(|r| r.bag.tweet_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
        assert!(top[0].score() > top[2].score());
        assert_eq!(idx.top_tweets("t", &cands, 1).len(), 1);
        assert_eq!(idx.top_tweets("t", &cands, 1)[0].bag.tweet_id, "a");
        assert!(idx.top_tweets("t", &cands, 0).is_empty());
    }
}
