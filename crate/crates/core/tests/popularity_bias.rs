use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use topicrec_core::corpus::{Corpus, CorpusPaths};
use topicrec_core::eval::wlw_count_interests;
use topicrec_core::expertise::{mine_experts, MinerConfig, TopicMatcher};
use topicrec_core::interest::{build_popularity, infer_interest, top_interests, EmConfig};
use topicrec_core::synth::{write_popularity_bias_fixture, BiasExpectation, EXPECTED_FILE};
use topicrec_core::text::Stopwords;

fn frozen() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/popularity_bias")
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn generator_reproduces_frozen_fixture() {
    let dir = tempfile::tempdir().unwrap();
    write_popularity_bias_fixture(dir.path()).unwrap();
    if std::env::var_os("TOPICREC_REFREEZE").is_some() {
        fs::create_dir_all(frozen()).unwrap();
        for (name, bytes) in read_dir(dir.path()) {
            fs::write(frozen().join(name), bytes).unwrap();
        }
    }
    let got = read_dir(dir.path());
    let want = read_dir(&frozen());
    assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>());
    for (name, bytes) in &want {
        assert!(got[name] == *bytes, "{name} differs from the frozen copy");
    }
}

#[test]
fn em_corrects_the_popularity_bias() {
    let corpus = Corpus::ingest(&CorpusPaths::in_dir(&frozen()), true).unwrap();
    assert_eq!(corpus.report().total_rejected(), 0);
    let expected: BiasExpectation =
        serde_json::from_slice(&fs::read(frozen().join(EXPECTED_FILE)).unwrap()).unwrap();

    let matcher = TopicMatcher::new(corpus.catalog(), &Stopwords::defaults());
    let experts = mine_experts(&corpus, &matcher, MinerConfig::default());
    let popularity = build_popularity(&experts).unwrap();

    let wlw = wlw_count_interests(&expected.user_id, &experts, &corpus, 50).unwrap();
    assert_eq!(wlw, expected.wlw_count_order);
    let pos = |v: &[String], t: &str| v.iter().position(|x| x == t).unwrap();
    assert!(pos(&wlw, &expected.popular_topic) <= pos(&wlw, &expected.niche_topic));

    let iv = infer_interest(&expected.user_id, &corpus, &experts, &popularity, &EmConfig::default()).unwrap();
    let em = top_interests(&iv, 50);
    assert_eq!(em, expected.em_order);
    assert!(iv.weight(&expected.niche_topic) > iv.weight(&expected.popular_topic));
}
