//! Explainable topical tweet recommendation.
//!
//! The pipeline runs in five stages, each in its own module:
//!
//! * [`corpus`] ingests and validates the raw inputs (topic catalog, Lists,
//!   follow edges, profiles, tweets).
//! * [`expertise`] matches List names and descriptions against the topic
//!   catalog and turns List memberships into per-user topical expertise.
//! * [`interest`] infers each user's interest distribution over topics with
//!   an EM algorithm over the topical preferential attachment model.
//! * [`bim`] trains entity/topic count tables and ranks tweets per topic.
//! * [`recommend`] assembles deduplicated, round-robin, explained lists.
//!
//! [`synth`] generates corpora with known ground truth and [`eval`] holds the
//! ranking metrics and the expert-counting baseline.

pub mod bim;
pub mod corpus;
pub mod eval;
pub mod expertise;
pub mod interest;
pub mod ndjson;
pub mod recommend;
pub mod synth;
pub mod text;

pub use interest::GLOBAL_TOPIC;
