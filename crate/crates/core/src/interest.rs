//! Interest inference over the topical preferential attachment model.
//!
//! A user follows an expert by first drawing a topic from their interest
//! vector, then drawing an expert on that topic in proportion to the expert's
//! popularity there: List-inclusion count for regular topics, follower count
//! for the global topic every expert belongs to. EM recovers the interest
//! vector from the set of experts the user follows.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusError};
use crate::expertise::ExpertSet;
use crate::ndjson::{self, id, Parsed, ReadError, RejectReason};

/// Key of the global topic in interest maps and output files.
pub const GLOBAL_TOPIC: &str = "<global>";

pub const DEFAULT_REL_IMPROVEMENT_STOP: f64 = 0.01;
pub const DEFAULT_MAX_ITERATIONS: usize = 100;

/// Below this |ℓ| the stop rule compares absolute improvement instead.
const ABS_LL_FLOOR: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum InterestError {
    #[error("user {0} follows no experts")]
    NoExpertFollowings(String),
    #[error("expert {0} has no popularity entry")]
    UnknownExpert(String),
    #[error("e-step denominator vanished for expert {0}")]
    DegenerateModel(String),
    #[error("popularity needs at least one expert")]
    NoExperts,
    #[error("invalid EM config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone)]
struct ExpertTheta {
    /// (regular topic, θ^t_v), sorted by topic.
    regular: Vec<(String, f64)>,
    global: f64,
}

/// Per-topic expert selection probabilities θ^t_v.
#[derive(Debug, Clone)]
pub struct TopicPopularity {
    experts: HashMap<String, ExpertTheta>,
}

/// θ^t ∝ λ_{·,t} on regular topics; θ^{t_g} ∝ φ + 1 over all experts.
///
/// λ is at least one for every stored expertise entry, so regular topics
/// need no smoothing; the add-one on φ keeps zero-follower experts
/// reachable through the global topic.
pub fn build_popularity(experts: &ExpertSet) -> Result<TopicPopularity, InterestError> {
    if experts.is_empty() {
        return Err(InterestError::NoExperts);
    }
    let mut topic_totals: HashMap<&str, f64> = HashMap::new();
    let mut global_total = 0.0;
    for rec in experts.iter() {
        for (t, &lambda) in &rec.expertise {
            *topic_totals.entry(t.as_str()).or_default() += lambda as f64;
        }
        global_total += rec.follower_count as f64 + 1.0;
    }
    let experts = experts
        .iter()
        .map(|rec| {
            let regular = rec
                .expertise
                .iter()
                .map(|(t, &lambda)| (t.clone(), lambda as f64 / topic_totals[t.as_str()]))
                .collect();
            let global = (rec.follower_count as f64 + 1.0) / global_total;
            (rec.user_id.clone(), ExpertTheta { regular, global })
        })
        .collect();
    Ok(TopicPopularity { experts })
}

impl TopicPopularity {
    /// θ^t_v, or `None` when `v` has no expertise on `t`.
    pub fn theta(&self, topic: &str, expert: &str) -> Option<f64> {
        let e = self.experts.get(expert)?;
        if topic == GLOBAL_TOPIC {
            return Some(e.global);
        }
        e.regular
            .binary_search_by(|(t, _)| t.as_str().cmp(topic))
            .ok()
            .map(|i| e.regular[i].1)
    }

    /// The topics of `expert`, global topic last.
    pub fn expert_topics(&self, expert: &str) -> Option<impl Iterator<Item = (&str, f64)>> {
        let e = self.experts.get(expert)?;
        Some(
            e.regular
                .iter()
                .map(|(t, th)| (t.as_str(), *th))
                .chain(std::iter::once((GLOBAL_TOPIC, e.global))),
        )
    }

    /// The full distribution θ^t over experts.
    pub fn distribution(&self, topic: &str) -> BTreeMap<&str, f64> {
        self.experts
            .keys()
            .filter_map(|v| self.theta(topic, v).map(|th| (v.as_str(), th)))
            .collect()
    }

    pub fn contains_expert(&self, expert: &str) -> bool {
        self.experts.contains_key(expert)
    }

    pub fn num_experts(&self) -> usize {
        self.experts.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub rel_improvement_stop: f64,
    pub max_iterations: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            rel_improvement_stop: DEFAULT_REL_IMPROVEMENT_STOP,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<(), InterestError> {
        if !(self.rel_improvement_stop > 0.0) {
            return Err(InterestError::InvalidConfig(
                "rel_improvement_stop must be positive".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(InterestError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A user's interest distribution over regular topics and the global topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterestVector {
    #[serde(deserialize_with = "id::deserialize")]
    pub user_id: String,
    pub weights: BTreeMap<String, f64>,
    pub iterations_run: usize,
    pub final_log_likelihood: f64,
}

impl InterestVector {
    pub fn weight(&self, topic: &str) -> f64 {
        self.weights.get(topic).copied().unwrap_or(0.0)
    }

    pub fn global_weight(&self) -> f64 {
        self.weight(GLOBAL_TOPIC)
    }
}

/// The EM problem for one user: each followed expert's topic set and θ.
#[derive(Debug, Clone)]
pub struct FollowModel {
    /// Local topic names, regular topics sorted, global topic last.
    topics: Vec<String>,
    experts: Vec<String>,
    /// Per followed expert: (local topic index, θ^t_v).
    rows: Vec<Vec<(usize, f64)>>,
}

/// Result of an EM run.
#[derive(Debug, Clone)]
pub struct EmRun {
    pub interest: Vec<f64>,
    pub iterations: usize,
    /// ℓ at the initial point followed by ℓ after each iteration.
    pub log_likelihoods: Vec<f64>,
}

impl FollowModel {
    pub fn new(followings: &BTreeSet<String>, popularity: &TopicPopularity) -> Result<Self, InterestError> {
        let mut topic_set: BTreeSet<&str> = BTreeSet::new();
        for v in followings {
            let topics = popularity
                .expert_topics(v)
                .ok_or_else(|| InterestError::UnknownExpert(v.clone()))?;
            topic_set.extend(topics.map(|(t, _)| t).filter(|&t| t != GLOBAL_TOPIC));
        }
        let mut topics: Vec<String> = topic_set.into_iter().map(str::to_string).collect();
        topics.push(GLOBAL_TOPIC.to_string());
        let index: HashMap<&str, usize> = topics
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let rows = followings
            .iter()
            .map(|v| {
                popularity
                    .expert_topics(v)
                    .into_iter()
                    .flatten()
                    .map(|(t, th)| (index[t], th))
                    .collect()
            })
            .collect();
        Ok(FollowModel {
            topics,
            experts: followings.iter().cloned().collect(),
            rows,
        })
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    pub fn num_followings(&self) -> usize {
        self.rows.len()
    }

    /// Regular topic weight ∝ number of followed experts on it; global weight
    /// ∝ number of followed experts.
    pub fn initial(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.topics.len()];
        for row in &self.rows {
            for &(t, _) in row {
                counts[t] += 1.0;
            }
        }
        let total: f64 = counts.iter().sum();
        counts.iter_mut().for_each(|c| *c /= total);
        counts
    }

    /// Posterior topic responsibilities w^v_t, one row per followed expert,
    /// aligned with that expert's topics.
    pub fn e_step(&self, interest: &[f64]) -> Result<Vec<Vec<f64>>, InterestError> {
        self.rows
            .iter()
            .zip(&self.experts)
            .map(|(row, v)| {
                let joint: Vec<f64> = row.iter().map(|&(t, th)| th * interest[t]).collect();
                let denom: f64 = joint.iter().sum();
                if !(denom > 0.0) || !denom.is_finite() {
                    return Err(InterestError::DegenerateModel(v.clone()));
                }
                Ok(joint.into_iter().map(|j| j / denom).collect())
            })
            .collect()
    }

    /// i_t = (1 / |followings|) Σ_v w^v_t.
    pub fn m_step(&self, weights: &[Vec<f64>]) -> Vec<f64> {
        let mut next = vec![0.0; self.topics.len()];
        for (row, w) in self.rows.iter().zip(weights) {
            for (&(t, _), &wt) in row.iter().zip(w) {
                next[t] += wt;
            }
        }
        let n = self.rows.len() as f64;
        next.iter_mut().for_each(|x| *x /= n);
        next
    }

    /// ℓ(i) = Σ_v log Σ_{t ∈ T^v} θ^t_v i_t.
    pub fn log_likelihood(&self, interest: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(t, th)| th * interest[t]).sum::<f64>().ln())
            .sum()
    }

    /// Runs EM from the data-driven initial point.
    pub fn run(&self, config: &EmConfig) -> Result<EmRun, InterestError> {
        self.run_from(self.initial(), config, |_, _, _| {})
    }

    /// Runs EM from `start`, calling `observe(iteration, iterate, ℓ)` after
    /// every update.
    pub fn run_from<F>(&self, start: Vec<f64>, config: &EmConfig, mut observe: F) -> Result<EmRun, InterestError>
    where
        F: FnMut(usize, &[f64], f64),
    {
        config.validate()?;
        let mut interest = start;
        let mut ll = self.log_likelihood(&interest);
        let mut log_likelihoods = vec![ll];
        let mut iterations = 0;
        while iterations < config.max_iterations {
            let w = self.e_step(&interest)?;
            interest = self.m_step(&w);
            iterations += 1;
            let next = self.log_likelihood(&interest);
            observe(iterations, &interest, next);
            log_likelihoods.push(next);
            let prev = std::mem::replace(&mut ll, next);
            let gain = next - prev;
            let done = if prev.abs() < ABS_LL_FLOOR {
                gain < ABS_LL_FLOOR
            } else {
                gain / prev.abs() < config.rel_improvement_stop
            };
            if done {
                break;
            }
        }
        Ok(EmRun {
            interest,
            iterations,
            log_likelihoods,
        })
    }

    pub fn to_vector(&self, user_id: &str, run: &EmRun) -> InterestVector {
        InterestVector {
            user_id: user_id.to_string(),
            weights: self.topics.iter().cloned().zip(run.interest.iter().copied()).collect(),
            iterations_run: run.iterations,
            final_log_likelihood: *run.log_likelihoods.last().unwrap_or(&f64::NAN),
        }
    }
}

/// Data-driven initial interest vector for a set of followed experts.
pub fn init_interest(
    user_id: &str,
    followings: &BTreeSet<String>,
    popularity: &TopicPopularity,
) -> Result<InterestVector, InterestError> {
    if followings.is_empty() {
        return Err(InterestError::NoExpertFollowings(user_id.to_string()));
    }
    let model = FollowModel::new(followings, popularity)?;
    let start = model.initial();
    let ll = model.log_likelihood(&start);
    Ok(model.to_vector(
        user_id,
        &EmRun {
            interest: start,
            iterations: 0,
            log_likelihoods: vec![ll],
        },
    ))
}

/// Expert -> topic -> w^v_t, straight from the map representation.
pub type ExpertWeights = BTreeMap<String, BTreeMap<String, f64>>;

/// One E-step on map-shaped inputs.
pub fn e_step(
    interest: &InterestVector,
    followings: &BTreeSet<String>,
    popularity: &TopicPopularity,
) -> Result<ExpertWeights, InterestError> {
    followings
        .iter()
        .map(|v| {
            let topics: Vec<(&str, f64)> = popularity
                .expert_topics(v)
                .ok_or_else(|| InterestError::UnknownExpert(v.clone()))?
                .map(|(t, th)| (t, th * interest.weight(t)))
                .collect();
            let denom: f64 = topics.iter().map(|(_, j)| j).sum();
            if !(denom > 0.0) || !denom.is_finite() {
                return Err(InterestError::DegenerateModel(v.clone()));
            }
            let w = topics
                .into_iter()
                .map(|(t, j)| (t.to_string(), j / denom))
                .collect();
            Ok((v.clone(), w))
        })
        .collect()
}

/// One M-step: average the per-expert responsibilities.
pub fn m_step(weights: &ExpertWeights, num_followings: usize) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for w in weights.values() {
        for (t, x) in w {
            *out.entry(t.clone()).or_default() += x;
        }
    }
    let n = num_followings as f64;
    out.values_mut().for_each(|x| *x /= n);
    out
}

/// Runs EM for a user with the given expert followings.
pub fn infer_from_followings(
    user_id: &str,
    followings: &BTreeSet<String>,
    popularity: &TopicPopularity,
    config: &EmConfig,
) -> Result<InterestVector, InterestError> {
    if followings.is_empty() {
        return Err(InterestError::NoExpertFollowings(user_id.to_string()));
    }
    let model = FollowModel::new(followings, popularity)?;
    let run = model.run(config)?;
    Ok(model.to_vector(user_id, &run))
}

/// Infers a user's interests from the corpus follow graph.
pub fn infer_interest(
    user_id: &str,
    corpus: &Corpus,
    experts: &ExpertSet,
    popularity: &TopicPopularity,
    config: &EmConfig,
) -> Result<InterestVector, InterestError> {
    let followings = corpus.expert_followings(user_id, experts)?;
    infer_from_followings(user_id, &followings, popularity, config)
}

/// The `m` heaviest regular topics with positive weight, ties by title.
pub fn top_interests(interest: &InterestVector, m: usize) -> Vec<String> {
    let mut topics: Vec<(&String, f64)> = interest
        .weights
        .iter()
        .filter(|(t, &w)| t.as_str() != GLOBAL_TOPIC && w > 0.0)
        .map(|(t, &w)| (t, w))
        .collect();
    topics.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    topics.into_iter().take(m).map(|(t, _)| t.clone()).collect()
}

/// Reads `interests.ndjson`, keyed by user id.
pub fn read_interests<R: BufRead>(
    reader: R,
    strict: bool,
) -> Result<(BTreeMap<String, InterestVector>, Parsed<()>), ReadError> {
    let mut out = BTreeMap::new();
    let parsed = ndjson::read_ndjson(reader, strict, |v: InterestVector| {
        if v.weights.values().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RejectReason::Invalid("weights must be finite and nonnegative".into()));
        }
        let total: f64 = v.weights.values().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(RejectReason::Invalid(format!("weights sum to {total}")));
        }
        if out.contains_key(&v.user_id) {
            return Err(RejectReason::Duplicate(format!("user_id {}", v.user_id)));
        }
        out.insert(v.user_id.clone(), v);
        Ok(())
    })?;
    Ok((out, parsed))
}

pub fn write_interests<'a, W: Write>(w: W, vectors: impl IntoIterator<Item = &'a InterestVector>) -> io::Result<()> {
    ndjson::write_ndjson(w, vectors)
}
