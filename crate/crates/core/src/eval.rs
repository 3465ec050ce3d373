//! Ranking metrics over Likert judgments and the expert-counting baseline.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::expertise::ExpertSet;
use crate::interest::InterestError;
use crate::ndjson::{self, id, Parsed, ReadError, RejectReason};

pub const MIN_SCORE: i64 = 1;
pub const MAX_SCORE: i64 = 5;
/// Scores at or above this count as relevant.
pub const RELEVANT_FROM: i64 = 4;
/// Label carried by reports: gain is the raw score, discount 1/log2(rank+1).
pub const NDCG_VARIANT: &str = "linear-gain/log2-discount";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("score {0} outside {MIN_SCORE}..={MAX_SCORE}")]
    ScoreOutOfRange(i64),
    #[error("ranking for user {0} is empty")]
    EmptyRanking(String),
    #[error("no rankings to evaluate")]
    NoRankings,
}

pub fn binarize(score: i64) -> Result<bool, EvalError> {
    if !(MIN_SCORE..=MAX_SCORE).contains(&score) {
        return Err(EvalError::ScoreOutOfRange(score));
    }
    Ok(score >= RELEVANT_FROM)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgedItem {
    #[serde(deserialize_with = "id::deserialize")]
    pub item_id: String,
    pub score: i64,
}

/// A user's judgments, in the order the system ranked the items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgedRanking {
    #[serde(deserialize_with = "id::deserialize")]
    pub user_id: String,
    pub items: Vec<JudgedItem>,
}

impl JudgedRanking {
    pub fn new<I, S>(user_id: impl Into<String>, scores: I) -> Self
    where
        I: IntoIterator<Item = (S, i64)>,
        S: Into<String>,
    {
        JudgedRanking {
            user_id: user_id.into(),
            items: scores
                .into_iter()
                .map(|(item_id, score)| JudgedItem {
                    item_id: item_id.into(),
                    score,
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<(), EvalError> {
        if self.items.is_empty() {
            return Err(EvalError::EmptyRanking(self.user_id.clone()));
        }
        for it in &self.items {
            binarize(it.score)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserMetrics {
    pub average_score: f64,
    /// Precision over the whole list.
    pub precision: f64,
    pub average_precision: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mean_average_score: f64,
    pub mean_precision: f64,
    pub map: f64,
    pub mean_ndcg: f64,
    pub num_users: usize,
    pub ndcg_variant: String,
}

fn dcg(scores: impl Iterator<Item = i64>) -> f64 {
    scores
        .enumerate()
        .map(|(i, s)| s as f64 / ((i + 2) as f64).log2())
        .sum()
}

/// Metrics for one ranking.
pub fn user_metrics(r: &JudgedRanking) -> Result<UserMetrics, EvalError> {
    r.validate()?;
    let n = r.items.len() as f64;
    let scores: Vec<i64> = r.items.iter().map(|i| i.score).collect();
    let average_score = scores.iter().sum::<i64>() as f64 / n;

    let mut hits = 0usize;
    let mut ap_sum = 0.0;
    for (i, &s) in scores.iter().enumerate() {
        if s >= RELEVANT_FROM {
            hits += 1;
            ap_sum += hits as f64 / (i + 1) as f64;
        }
    }
    let precision = hits as f64 / n;
    let average_precision = if hits == 0 { 0.0 } else { ap_sum / hits as f64 };

    let mut ideal = scores.clone();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    // Scores are at least 1, so the ideal DCG is positive.
    let ndcg = dcg(scores.iter().copied()) / dcg(ideal.into_iter());

    Ok(UserMetrics {
        average_score,
        precision,
        average_precision,
        ndcg,
    })
}

/// Per-user metrics averaged over users.
pub fn compute_metrics(rankings: &[JudgedRanking]) -> Result<MetricReport, EvalError> {
    if rankings.is_empty() {
        return Err(EvalError::NoRankings);
    }
    let per_user: Vec<UserMetrics> = rankings.par_iter().map(user_metrics).collect::<Result<_, _>>()?;
    let n = per_user.len() as f64;
    let mean = |f: fn(&UserMetrics) -> f64| per_user.iter().map(f).sum::<f64>() / n;
    Ok(MetricReport {
        mean_average_score: mean(|m| m.average_score),
        mean_precision: mean(|m| m.precision),
        map: mean(|m| m.average_precision),
        mean_ndcg: mean(|m| m.ndcg),
        num_users: per_user.len(),
        ndcg_variant: NDCG_VARIANT.to_string(),
    })
}

/// Ranks topics by how many of the followed experts have each one; ties by
/// title. Truncated to `m`.
pub fn wlw_count_from_followings(
    user_id: &str,
    followings: &BTreeSet<String>,
    experts: &ExpertSet,
    m: usize,
) -> Result<Vec<String>, InterestError> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in followings {
        let rec = experts
            .get(v)
            .ok_or_else(|| InterestError::UnknownExpert(v.clone()))?;
        for t in rec.expertise.keys() {
            *counts.entry(t).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(InterestError::NoExpertFollowings(user_id.to_string()));
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Ok(ranked.into_iter().take(m).map(|(t, _)| t.to_string()).collect())
}

pub fn wlw_count_interests(
    user_id: &str,
    experts: &ExpertSet,
    corpus: &Corpus,
    m: usize,
) -> Result<Vec<String>, InterestError> {
    let followings = corpus.expert_followings(user_id, experts)?;
    wlw_count_from_followings(user_id, &followings, experts, m)
}

/// Reads a judgments file. Rankings must be nonempty with scores in range,
/// and each user may appear once.
pub fn read_judgments<R: BufRead>(reader: R, strict: bool) -> Result<Parsed<JudgedRanking>, ReadError> {
    let mut seen = BTreeSet::new();
    ndjson::read_ndjson(reader, strict, |r: JudgedRanking| {
        r.validate().map_err(|e| RejectReason::Invalid(e.to_string()))?;
        if !seen.insert(r.user_id.clone()) {
            return Err(RejectReason::Duplicate(format!("user_id {}", r.user_id)));
        }
        Ok(r)
    })
}

pub fn write_report<W: Write>(mut w: W, report: &MetricReport) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)
}
