//! Checks shared by the fuzz targets and the stable seed replay test.
//! Each takes arbitrary bytes and panics only on a real bug.

use topicrec_core::bim::TopicModelIndex;
use topicrec_core::corpus::{read_catalog, read_follows, read_lists, read_profiles, read_tweets};
use topicrec_core::eval::{compute_metrics, read_judgments};
use topicrec_core::expertise::ExpertSet;
use topicrec_core::interest::read_interests;
use topicrec_core::ndjson::{Parsed, ReadError};
use topicrec_core::synth::SynthSpec;
use topicrec_service::replay_log;

/// Lenient reads never fail on in-memory input and account for every line;
/// strict reads succeed exactly when the lenient read rejected nothing.
fn line_reader<T>(data: &[u8], read: impl Fn(&[u8], bool) -> Result<Parsed<T>, ReadError>) {
    let lenient = read(data, false).expect("lenient read of in-memory input");
    assert_eq!(lenient.records.len() + lenient.rejections.len(), lenient.lines);
    let strict = read(data, true);
    assert_eq!(strict.is_ok(), lenient.rejections.is_empty());
}

pub fn lists(data: &[u8]) {
    line_reader(data, |d, s| read_lists(d, s));
}

pub fn tweets(data: &[u8]) {
    line_reader(data, |d, s| read_tweets(d, s));
}

pub fn follows(data: &[u8]) {
    line_reader(data, |d, s| read_follows(d, s));
}

pub fn profiles(data: &[u8]) {
    line_reader(data, |d, s| read_profiles(d, s));
}

/// `topics.tsv` and `redirects.tsv`, separated by the first NUL byte.
pub fn catalog(data: &[u8]) {
    let (topics, redirects) = match data.iter().position(|&b| b == 0) {
        Some(i) => (&data[..i], &data[i + 1..]),
        None => (data, &[][..]),
    };
    let (catalog, t, r) = read_catalog(topics, redirects, false).expect("lenient read");
    assert_eq!(t.records.len() + t.rejections.len(), t.lines);
    assert_eq!(r.records.len() + r.rejections.len(), r.lines);
    for (alias, _) in &r.records {
        assert!(catalog.canonical(alias).is_some(), "accepted alias {alias:?} does not resolve");
    }
    let _ = read_catalog(topics, redirects, true);
}

pub fn experts(data: &[u8]) {
    let (set, parsed) = ExpertSet::read(data, false).expect("lenient read");
    assert_eq!(parsed.records.len() + parsed.rejections.len(), parsed.lines);
    for rec in set.iter() {
        assert!(!rec.expertise.is_empty() && rec.expertise.values().all(|&n| n > 0));
    }
    let _ = ExpertSet::read(data, true);
}

pub fn interests(data: &[u8]) {
    let (map, _) = read_interests(data, false).expect("lenient read");
    for iv in map.values() {
        let total: f64 = iv.weights.values().sum();
        assert!((total - 1.0).abs() <= 1e-6);
    }
    let _ = read_interests(data, true);
}

pub fn judgments(data: &[u8]) {
    let parsed = read_judgments(data, false).expect("lenient read");
    assert_eq!(parsed.records.len() + parsed.rejections.len(), parsed.lines);
    if let Ok(report) = compute_metrics(&parsed.records) {
        for m in [report.mean_precision, report.map, report.mean_ndcg] {
            assert!((0.0..=1.0 + 1e-12).contains(&m), "metric {m} out of range");
        }
    }
    let _ = read_judgments(data, true);
}

/// Parsing and validation only; generation cost grows with the counts.
pub fn synth_spec(data: &[u8]) {
    if let Ok(spec) = serde_json::from_slice::<SynthSpec>(data) {
        let _ = spec.validate();
    }
}

/// Anything that decodes re-encodes to bytes that decode to the same index.
pub fn bim_index(data: &[u8]) {
    if let Ok(idx) = TopicModelIndex::from_bytes(data) {
        let bytes = idx.to_bytes();
        let back = TopicModelIndex::from_bytes(&bytes).expect("re-encoded index decodes");
        assert!(back == idx);
        assert_eq!(back.to_bytes(), bytes);
    }
}

pub fn journal(data: &[u8]) {
    let text = String::from_utf8_lossy(data);
    let state = replay_log(&text, "fuzz");
    let _ = state.merged(None);
}

/// Target name and check, in the order of `fuzz/fuzz_targets/`.
pub type Check = fn(&[u8]);

pub const TARGETS: &[(&str, Check)] = &[
    ("lists", lists),
    ("tweets", tweets),
    ("follows", follows),
    ("profiles", profiles),
    ("catalog", catalog),
    ("experts", experts),
    ("interests", interests),
    ("judgments", judgments),
    ("synth_spec", synth_spec),
    ("bim_index", bim_index),
    ("journal", journal),
];
