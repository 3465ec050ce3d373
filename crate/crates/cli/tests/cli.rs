use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn topicrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topicrec"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = topicrec(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ndjson(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = d.join("spec.json");
    fs::write(
        &spec,
        r#"{"num_topics":4,"num_experts":16,"num_users":10,"follows_per_user":20,
            "tweets_per_expert":6,"vocab_size":300,"entities_per_tweet":5,"topic_entity_skew":1.0,"seed":5}"#,
    )
    .unwrap();
    let raw = d.join("raw");
    ok(&["synth", "--spec", p(&spec), "--out", p(&raw)]);
    assert!(raw.join("ground_truth.ndjson").exists());

    let store = d.join("store");
    let f = |name: &str| raw.join(name).to_str().unwrap().to_string();
    ok(&[
        "ingest", "--lists", &f("lists.ndjson"), "--tweets", &f("tweets.ndjson"), "--follows", &f("follows.ndjson"),
        "--profiles", &f("profiles.ndjson"), "--topics", &f("topics.tsv"), "--redirects", &f("redirects.tsv"),
        "--out", p(&store), "--strict",
    ]);
    let report: Value = serde_json::from_str(&fs::read_to_string(store.join("ingest_report.json")).unwrap()).unwrap();
    assert!(report["files"].as_array().unwrap().iter().all(|f| f["rejected"] == 0));

    let experts = d.join("experts.ndjson");
    ok(&["mine-experts", "--store", p(&store), "--threshold", "10", "--max-topics", "50", "--out", p(&experts)]);
    assert_eq!(ndjson(&experts).len(), 16);

    let interests = d.join("interests.ndjson");
    ok(&["infer-interests", "--store", p(&store), "--experts", p(&experts), "--all-users", "--out", p(&interests)]);
    let vectors = ndjson(&interests);
    assert_eq!(vectors.len(), 10);
    for v in &vectors {
        let total: f64 = v["weights"].as_object().unwrap().values().map(|w| w.as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(v["weights"].get("<global>").is_some());
    }
    let one = d.join("one.ndjson");
    ok(&["infer-interests", "--store", p(&store), "--experts", p(&experts), "--user", "u00003", "--max-iters", "100", "--stop", "0.01", "--out", p(&one)]);
    assert_eq!(ndjson(&one), vectors[2..3]);

    let index = d.join("index.bim");
    ok(&["train-bim", "--store", p(&store), "--experts", p(&experts), "--delta", "1", "--k", "5", "--nu", "3", "--out", p(&index)]);
    assert_eq!(&fs::read(&index).unwrap()[..4], b"TBIM");

    let topic = fs::read_to_string(raw.join("topics.tsv")).unwrap().lines().next().unwrap().split('\t').next().unwrap().to_string();
    let scores = d.join("scores.ndjson");
    ok(&["score", "--index", p(&index), "--topic", &topic, "--tweets", &f("tweets.ndjson"), "--top", "7", "--out", p(&scores)]);
    let scores = ndjson(&scores);
    assert_eq!(scores.len(), 7);
    for w in scores.windows(2) {
        assert!(w[0]["log_score"].as_f64().unwrap() >= w[1]["log_score"].as_f64().unwrap());
    }
    assert!(scores.iter().all(|s| s["topic"] == topic.as_str() && s["score"].as_f64().unwrap() > 0.0));

    let recs = d.join("recs.ndjson");
    let rec_args = |out: &Path| {
        ok(&[
            "recommend", "--store", p(&store), "--experts", p(&experts), "--interests", p(&interests), "--index",
            p(&index), "--user", "u00001", "--user", "u00002", "--m", "50", "--n", "1000", "--limit", "5",
            "--generated-at", "2024-05-01T00:00:00Z", "--out", p(out),
        ])
    };
    rec_args(&recs);
    let lists = ndjson(&recs);
    assert_eq!(lists.len(), 2);
    assert_eq!(lists[0]["user_id"], "u00001");
    assert_eq!(lists[0]["generated_at"], "2024-05-01T00:00:00Z");
    let items = lists[0]["items"].as_array().unwrap();
    assert_eq!(items.len(), 5);
    assert!(items.iter().all(|i| i["topical_rank"].as_u64().unwrap() >= 1));
    let again = d.join("recs2.ndjson");
    rec_args(&again);
    assert_eq!(fs::read(&recs).unwrap(), fs::read(&again).unwrap());

    let judgments = d.join("judgments.ndjson");
    fs::write(
        &judgments,
        "{\"user_id\":\"a\",\"items\":[{\"item_id\":\"x\",\"score\":5},{\"item_id\":\"y\",\"score\":1}]}\n\
         {\"user_id\":\"b\",\"items\":[{\"item_id\":\"x\",\"score\":1},{\"item_id\":\"y\",\"score\":5}]}\n",
    )
    .unwrap();
    let report = d.join("report.json");
    ok(&["eval", "--judgments", p(&judgments), "--out", p(&report)]);
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["num_users"], 2);
    assert_eq!(r["mean_average_score"], 3.0);
    assert_eq!(r["mean_precision"], 0.5);
    assert_eq!(r["map"], 0.75);
    assert_eq!(r["ndcg_variant"], "linear-gain/log2-discount");
}

#[test]
fn popularity_bias_fixture_matches_the_frozen_copy() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--popularity-bias", "--out", p(dir.path())]);
    let frozen = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/popularity_bias");
    for e in fs::read_dir(&frozen).unwrap() {
        let e = e.unwrap();
        assert_eq!(fs::read(e.path()).unwrap(), fs::read(dir.path().join(e.file_name())).unwrap());
    }
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = d.join("spec.json");
    fs::write(&spec, r#"{"num_topics":0,"num_experts":1,"num_users":1,"follows_per_user":1,"tweets_per_expert":1,"vocab_size":10,"entities_per_tweet":1,"topic_entity_skew":1.0,"seed":1}"#).unwrap();
    let out = topicrec(&["synth", "--spec", p(&spec), "--out", p(&d.join("x"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    let out = topicrec(&["eval", "--judgments", p(&d.join("missing.ndjson")), "--out", p(&d.join("r.json"))]);
    assert!(!out.status.success());

    let bad = d.join("bad.ndjson");
    fs::write(&bad, "{\"user_id\":\"a\",\"items\":[{\"item_id\":\"x\",\"score\":9}]}\n").unwrap();
    let out = topicrec(&["eval", "--judgments", p(&bad), "--strict", "--out", p(&d.join("r.json"))]);
    assert!(!out.status.success());

    let out = topicrec(&["train-bim", "--store", "x", "--experts", "y", "--delta=-1", "--out", "z"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta"));

    let out = topicrec(&["infer-interests", "--store", "x", "--experts", "y", "--out", "z"]);
    assert!(!out.status.success());
}
