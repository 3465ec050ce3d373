//! Replays the checked-in fuzz seeds through the fuzz targets' checks, so
//! the corpora stay valid inputs and the checks hold on stable.

use std::fs;
use std::path::Path;

#[path = "../../../fuzz/src/lib.rs"]
mod checks;

#[test]
fn seeds_pass_every_check() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz");
    for (name, check) in checks::TARGETS {
        let src = root.join("fuzz_targets").join(format!("{name}.rs"));
        assert!(src.is_file(), "no fuzz target for {name}");
        let dir = root.join("corpus").join(name);
        let mut seeds: Vec<_> = fs::read_dir(&dir)
            .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("seed_")))
            .collect();
        seeds.sort();
        assert!(!seeds.is_empty(), "no seeds for {name}");
        for seed in seeds {
            check(&fs::read(&seed).unwrap());
        }
    }
}

#[test]
fn every_target_has_a_check() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/fuzz_targets");
    let mut targets: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    targets.sort();
    let mut known: Vec<String> = checks::TARGETS.iter().map(|(n, _)| n.to_string()).collect();
    known.sort();
    assert_eq!(targets, known);
}

#[test]
fn edge_inputs() {
    for (_, check) in checks::TARGETS {
        for data in [&b""[..], b"\n", b"\0", b"{}", b"\xff\xfe", b"TBIM", &[0u8; 64]] {
            check(data);
        }
    }
}
