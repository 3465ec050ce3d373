//! Topical Binary Independence Model.
//!
//! A tweet is a set of entities. For topic `t`, each entity contributes
//!
//! ```text
//! s(e,t) = n_et (n - n_e + δ) / (n_e (n_t - n_et + δ))   if n_et >= k
//!        = 1                                             otherwise
//! ```
//!
//! and a tweet's score is the product of its `ν` largest factors. Scoring a
//! tweet touches only the entities in it; the corpus-wide background term is
//! never materialized.

mod extract;
mod format;
mod index;

pub use extract::{candidate_bags, extract_entities, training_bags, EntityBag, EntityExtractor, TokenExtractor};
pub use format::{FormatError, FORMAT_VERSION, MAGIC};
pub use index::{train_index, IndexBuilder, Ranked, TopicModelIndex};

use serde::{Deserialize, Serialize};

pub const DEFAULT_DELTA: f64 = 1.0;
pub const DEFAULT_MIN_COUNT: u64 = 5;
pub const DEFAULT_NU: usize = 3;
pub const DEFAULT_TOP_N: usize = 1000;

/// Smoothing, occurrence gate and truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BimParams {
    pub delta: f64,
    pub k: u64,
    /// Number of largest factors multiplied; `None` multiplies all of them.
    pub nu: Option<usize>,
}

impl Default for BimParams {
    fn default() -> Self {
        BimParams {
            delta: DEFAULT_DELTA,
            k: DEFAULT_MIN_COUNT,
            nu: Some(DEFAULT_NU),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("delta must be finite and nonnegative, got {0}")]
    Delta(f64),
    #[error("nu must be at least 1 (use no truncation instead of 0)")]
    Nu,
}

impl BimParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !self.delta.is_finite() || self.delta < 0.0 {
            return Err(ParamError::Delta(self.delta));
        }
        if self.nu == Some(0) {
            return Err(ParamError::Nu);
        }
        Ok(())
    }
}

/// Raw counts behind one `s(e,t)` factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub n: u64,
    pub n_e: u64,
    pub n_t: u64,
    pub n_et: u64,
}

/// The per-entity factor `s(e,t)`.
///
/// An entity never seen in the corpus, or never seen on the topic, carries no
/// evidence and scores 1 regardless of `k`. With `δ = 0` a boundary count
/// (`n_et == n_t`) yields `+inf`.
pub fn entity_topic_factor(c: PairCounts, params: &BimParams) -> f64 {
    if c.n_e == 0 || c.n_et == 0 || c.n_et < params.k {
        return 1.0;
    }
    let num = c.n_et as f64 * ((c.n - c.n_e) as f64 + params.delta);
    let den = c.n_e as f64 * ((c.n_t - c.n_et) as f64 + params.delta);
    num / den
}

/// Sum of the `nu` largest log factors, added in descending order so equal
/// multisets give bit-identical sums. Reorders the buffer.
pub(crate) fn truncated_log_product(logs: &mut [f64], nu: Option<usize>) -> f64 {
    let top = match nu {
        Some(v) if v < logs.len() => {
            logs.select_nth_unstable_by(v - 1, |a, b| b.total_cmp(a));
            &mut logs[..v]
        }
        _ => logs,
    };
    top.sort_unstable_by(|a, b| b.total_cmp(a));
    // Folding from +0.0 keeps empty bags at +0.0 (`sum` would give -0.0,
    // which `total_cmp` orders below neutral scores).
    top.iter().fold(0.0, |acc, x| acc + x)
}
