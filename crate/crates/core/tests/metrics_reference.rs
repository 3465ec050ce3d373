use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topicrec_core::eval::{compute_metrics, user_metrics, JudgedRanking};

fn ratio(a: usize, b: usize) -> BigRational {
    BigRational::new(a.into(), b.into())
}

/// Average precision by exact rational arithmetic, recounting each prefix.
fn reference_ap(scores: &[i64]) -> f64 {
    let relevant: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= 4).collect();
    if relevant.is_empty() {
        return 0.0;
    }
    let mut sum = BigRational::zero();
    for &k in &relevant {
        let hits = scores[..=k].iter().filter(|&&s| s >= 4).count();
        sum += ratio(hits, k + 1);
    }
    (sum / ratio(relevant.len(), 1)).to_f64().unwrap()
}

fn reference_precision(scores: &[i64]) -> f64 {
    ratio(scores.iter().filter(|&&s| s >= 4).count(), scores.len()).to_f64().unwrap()
}

fn reference_dcg(scores: &[i64]) -> f64 {
    let mut total = 0.0;
    for (i, &s) in scores.iter().enumerate() {
        total += s as f64 * std::f64::consts::LN_2 / ((i + 2) as f64).ln();
    }
    total
}

/// Ideal DCG as the maximum over every permutation.
fn reference_idcg(scores: &[i64]) -> f64 {
    fn go(rest: &mut Vec<i64>, prefix: &mut Vec<i64>, best: &mut f64) {
        if rest.is_empty() {
            *best = best.max(reference_dcg(prefix));
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            prefix.push(x);
            go(rest, prefix, best);
            prefix.pop();
            rest.insert(i, x);
        }
    }
    let mut best = f64::NEG_INFINITY;
    go(&mut scores.to_vec(), &mut Vec::new(), &mut best);
    best
}

fn ranking(user: &str, scores: &[i64]) -> JudgedRanking {
    JudgedRanking::new(user, scores.iter().enumerate().map(|(i, &s)| (format!("t{i}"), s)))
}

#[test]
fn randomized_fixtures_match_reference() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rankings = Vec::new();
        let mut want = [0.0f64; 4];
        let users = rng.random_range(1..8);
        for u in 0..users {
            let len = rng.random_range(1..=7);
            let scores: Vec<i64> = (0..len).map(|_| rng.random_range(1..=5)).collect();
            let r = ranking(&format!("u{u}"), &scores);
            let m = user_metrics(&r).unwrap();
            let avg = ratio(scores.iter().sum::<i64>() as usize, len).to_f64().unwrap();
            let ndcg = reference_dcg(&scores) / reference_idcg(&scores);
            let (p, ap) = (reference_precision(&scores), reference_ap(&scores));
            assert!((m.average_score - avg).abs() < 1e-9, "seed {seed} {scores:?}");
            assert!((m.precision - p).abs() < 1e-9, "seed {seed} {scores:?}");
            assert!((m.average_precision - ap).abs() < 1e-9, "seed {seed} {scores:?}");
            assert!((m.ndcg - ndcg).abs() < 1e-9, "seed {seed} {scores:?}");
            for (w, x) in want.iter_mut().zip([avg, p, ap, ndcg]) {
                *w += x / users as f64;
            }
            rankings.push(r);
        }
        let report = compute_metrics(&rankings).unwrap();
        let got = [report.mean_average_score, report.mean_precision, report.map, report.mean_ndcg];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-9, "seed {seed}: {got:?} vs {want:?}");
        }
        assert_eq!(report.num_users, users);
    }
}

fn scores() -> impl Strategy<Value = Vec<i64>> {
    proptest::collection::vec(1i64..=5, 1..9)
}

proptest! {
    #[test]
    fn ap_is_one_iff_relevant_items_lead(s in scores()) {
        let ap = user_metrics(&ranking("u", &s)).unwrap().average_precision;
        let relevant = s.iter().filter(|&&x| x >= 4).count();
        let leading = relevant > 0 && s[..relevant].iter().all(|&x| x >= 4);
        prop_assert_eq!(ap == 1.0, leading, "{:?} -> {}", s, ap);
    }

    #[test]
    fn ndcg_bounded_and_one_when_sorted(s in scores()) {
        let ndcg = user_metrics(&ranking("u", &s)).unwrap().ndcg;
        prop_assert!(ndcg > 0.0 && ndcg <= 1.0 + 1e-12);
        let mut sorted = s.clone();
        sorted.sort_by(|a, b| b.cmp(a));
        let best = user_metrics(&ranking("u", &sorted)).unwrap().ndcg;
        prop_assert!((best - 1.0).abs() < 1e-12);
        prop_assert!(ndcg <= best + 1e-12);
    }

    #[test]
    fn swapping_an_inversion_raises_ndcg(s in scores(), i in 0usize..8, j in 0usize..8) {
        let (i, j) = (i % s.len(), j % s.len());
        let (i, j) = (i.min(j), i.max(j));
        prop_assume!(s[i] < s[j]);
        let before = user_metrics(&ranking("u", &s)).unwrap().ndcg;
        let mut t = s.clone();
        t.swap(i, j);
        let after = user_metrics(&ranking("u", &t)).unwrap().ndcg;
        prop_assert!(after > before);
    }

    #[test]
    fn rejects_out_of_range_scores(s in scores(), bad in prop_oneof![-5i64..1, 6i64..20], at in 0usize..8) {
        let mut s = s;
        let at = at % s.len();
        s[at] = bad;
        prop_assert!(user_metrics(&ranking("u", &s)).is_err());
    }
}
