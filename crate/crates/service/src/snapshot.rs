//! Immutable loaded state, swapped as a whole on reload.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use topicrec_core::bim::{candidate_bags, EntityBag, TokenExtractor, TopicModelIndex};
use topicrec_core::corpus::Corpus;
use topicrec_core::expertise::ExpertSet;
use topicrec_core::interest::{build_popularity, read_interests, InterestVector, TopicPopularity};
use topicrec_core::recommend::TopicListCache;

use crate::error::LoadError;

/// Where the service reads its inputs from.
#[derive(Debug, Clone)]
pub struct Sources {
    /// Store directory written by `topicrec ingest`.
    pub store: PathBuf,
    pub experts: PathBuf,
    pub index: PathBuf,
    /// Offline-inferred interests; users missing here need a recompute.
    pub interests: Option<PathBuf>,
}

pub struct Snapshot {
    pub corpus: Corpus,
    pub experts: ExpertSet,
    pub popularity: TopicPopularity,
    pub index: TopicModelIndex,
    /// Entity bags of the English tweets in the store.
    pub candidates: Vec<EntityBag>,
    pub texts: HashMap<String, String>,
    pub interests: BTreeMap<String, InterestVector>,
    /// Stamped on every recommendation list served from this snapshot.
    pub loaded_at: String,
    /// Topical lists over `index` and `candidates`, filled on demand.
    pub topic_lists: TopicListCache,
}

fn open(path: &Path) -> Result<BufReader<File>, LoadError> {
    File::open(path).map(BufReader::new).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl Snapshot {
    pub fn load(sources: &Sources, loaded_at: String) -> Result<Self, LoadError> {
        let corpus = Corpus::open(&sources.store)?;
        let (experts, _) = ExpertSet::read(open(&sources.experts)?, true).map_err(|source| LoadError::Read {
            path: sources.experts.clone(),
            source,
        })?;
        let popularity = build_popularity(&experts)?;
        let index = TopicModelIndex::open(&sources.index).map_err(|source| LoadError::Index {
            path: sources.index.clone(),
            source,
        })?;
        let interests = match &sources.interests {
            Some(path) => {
                read_interests(open(path)?, true)
                    .map_err(|source| LoadError::Read {
                        path: path.clone(),
                        source,
                    })?
                    .0
            }
            None => BTreeMap::new(),
        };
        let candidates = candidate_bags(corpus.tweets(), &TokenExtractor::default());
        let texts = corpus
            .tweets()
            .iter()
            .filter(|t| t.is_english())
            .map(|t| (t.tweet_id.clone(), t.text.clone()))
            .collect();
        log::info!(
            "loaded {} experts, {} candidate tweets, {} inferred users",
            experts.len(),
            candidates.len(),
            interests.len()
        );
        Ok(Snapshot {
            corpus,
            experts,
            popularity,
            index,
            candidates,
            texts,
            interests,
            loaded_at,
            topic_lists: TopicListCache::new(),
        })
    }

    /// Resolves a topic title or redirect alias to its canonical title.
    pub fn canonical_topic<'a>(&'a self, title: &'a str) -> Option<&'a str> {
        self.corpus.catalog().canonical(title)
    }
}
