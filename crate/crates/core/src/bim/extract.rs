use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::TweetRecord;
use crate::expertise::ExpertSet;
use crate::text::Stopwords;

/// The set of entities present in one tweet. Presence is binary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityBag {
    pub tweet_id: String,
    pub entities: BTreeSet<String>,
}

impl EntityBag {
    pub fn new<I, S>(tweet_id: impl Into<String>, entities: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        EntityBag {
            tweet_id: tweet_id.into(),
            entities: entities.into_iter().map(Into::into).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

/// Turns tweet text into entities. Implementations must be deterministic.
pub trait EntityExtractor: Send + Sync {
    fn extract(&self, text: &str) -> BTreeSet<String>;
}

/// Rule-based extractor standing in for a POS tagger.
///
/// Keeps `#hashtags` (body lowercased, `#` stripped) and lowercased
/// alphabetic runs of at least two letters that are not stopwords. URLs and
/// `@mentions` are dropped.
#[derive(Debug, Clone)]
pub struct TokenExtractor {
    stopwords: Stopwords,
}

impl TokenExtractor {
    pub fn new(stopwords: Stopwords) -> Self {
        TokenExtractor { stopwords }
    }
}

impl Default for TokenExtractor {
    fn default() -> Self {
        Self::new(Stopwords::defaults())
    }
}

fn is_url(tok: &str) -> bool {
    let lower = tok.to_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

impl EntityExtractor for TokenExtractor {
    fn extract(&self, text: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for raw in text.split_whitespace() {
            if raw.starts_with('@') || is_url(raw) {
                continue;
            }
            if let Some(body) = raw.strip_prefix('#') {
                let tag: String = body
                    .chars()
                    .take_while(|c| c.is_alphanumeric() || *c == '_')
                    .flat_map(char::to_lowercase)
                    .collect();
                if !tag.is_empty() {
                    out.insert(tag);
                }
                continue;
            }
            let cleaned: String = raw
                .chars()
                .filter(|c| !matches!(c, '\'' | '\u{2019}'))
                .collect();
            for run in cleaned.split(|c: char| !c.is_alphabetic()) {
                if run.chars().count() < 2 {
                    continue;
                }
                let word = run.to_lowercase();
                if !self.stopwords.contains(&word) {
                    out.insert(word);
                }
            }
        }
        out
    }
}

/// Extracts the entity bag of a tweet. Callers filter on `lang` first.
pub fn extract_entities(tweet: &TweetRecord, extractor: &dyn EntityExtractor) -> EntityBag {
    EntityBag {
        tweet_id: tweet.tweet_id.clone(),
        entities: extractor.extract(&tweet.text),
    }
}

/// Entity bags of the English tweets, in input order.
pub fn candidate_bags(tweets: &[TweetRecord], extractor: &dyn EntityExtractor) -> Vec<EntityBag> {
    tweets
        .par_iter()
        .filter(|t| t.is_english())
        .map(|t| extract_entities(t, extractor))
        .collect()
}

/// Training input: every English tweet with its author's expertise topics
/// (none for non-experts, whose tweets only feed `n` and `n_e`).
pub fn training_bags(
    tweets: &[TweetRecord],
    experts: &ExpertSet,
    extractor: &dyn EntityExtractor,
) -> Vec<(EntityBag, Vec<String>)> {
    tweets
        .par_iter()
        .filter(|t| t.is_english())
        .map(|t| {
            let topics = experts
                .get(&t.author_id)
                .map(|r| r.expertise.keys().cloned().collect())
                .unwrap_or_default();
            (extract_entities(t, extractor), topics)
        })
        .collect()
}
