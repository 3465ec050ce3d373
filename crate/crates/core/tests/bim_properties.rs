use proptest::prelude::*;
use topicrec_core::bim::{entity_topic_factor, BimParams, EntityBag, IndexBuilder, PairCounts, TopicModelIndex};

const WORDS: [&str; 10] = ["ace", "bat", "cue", "dot", "elk", "fig", "gym", "hub", "ink", "jam"];
const TOPICS: [&str; 3] = ["red", "green", "blue"];

fn bag(id: usize, mask: u16) -> EntityBag {
    EntityBag::new(
        format!("t{id:03}"),
        WORDS.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, w)| *w),
    )
}

/// Tweets as (entity mask, author topic mask).
fn corpus() -> impl Strategy<Value = Vec<(u16, u8)>> {
    proptest::collection::vec((1u16..1024, 0u8..8), 1..60)
}

fn params() -> impl Strategy<Value = BimParams> {
    (0.05f64..3.0, 0u64..4, proptest::option::of(1usize..5)).prop_map(|(delta, k, nu)| BimParams { delta, k, nu })
}

fn build(tweets: &[(u16, u8)], params: BimParams) -> TopicModelIndex {
    let mut b = IndexBuilder::new();
    for (i, &(e, t)) in tweets.iter().enumerate() {
        let topics = TOPICS.iter().enumerate().filter(|(j, _)| t & (1 << j) != 0).map(|(_, t)| *t);
        b.add(&bag(i, e), topics);
    }
    b.finish(params)
}

proptest! {
    #[test]
    fn factor_increases_with_joint_count(n_e in 1u64..50, extra in 0u64..50, n_t in 1u64..50, k in 0u64..5, delta in 0.01f64..5.0) {
        let n = n_e + n_t + extra;
        let p = BimParams { delta, k, nu: None };
        for n_et in k.max(1)..n_e.min(n_t) {
            let lo = entity_topic_factor(PairCounts { n, n_e, n_t, n_et }, &p);
            let hi = entity_topic_factor(PairCounts { n, n_e, n_t, n_et: n_et + 1 }, &p);
            prop_assert!(hi > lo, "n_et {n_et}: {lo} !< {hi}");
        }
    }

    #[test]
    fn scores_finite_and_positive(tweets in corpus(), p in params(), probe in 0u16..1024) {
        let idx = build(&tweets, p);
        let b = bag(999, probe);
        for t in TOPICS.iter().chain(&["unseen"]) {
            let s = idx.rank_score(&b, t);
            prop_assert!(s.is_finite() && s > 0.0, "{t}: {s}");
        }
    }

    #[test]
    fn lookups_equal_bag_size(tweets in corpus(), p in params(), probes in proptest::collection::vec(0u16..1024, 1..20)) {
        let idx = build(&tweets, p);
        let bags: Vec<EntityBag> = probes.iter().enumerate().map(|(i, &m)| bag(i, m)).collect();
        for b in &bags {
            idx.reset_lookup_count();
            idx.rank_score(b, "red");
            prop_assert_eq!(idx.lookup_count(), b.len() as u64);
        }
        idx.reset_lookup_count();
        idx.top_tweets("green", &bags, 5);
        prop_assert_eq!(idx.lookup_count(), bags.iter().map(|b| b.len() as u64).sum::<u64>());
    }

    #[test]
    fn low_factors_do_not_lengthen_scores(tweets in corpus(), p in params(), nu in 1usize..5, probe in 1u16..1024, topic in 0usize..3) {
        let t = TOPICS[topic];
        let b = bag(0, probe);
        let nu = nu.min(b.len());
        let idx = build(&tweets, BimParams { nu: Some(nu), ..p });
        let mut factors: Vec<f64> = b.entities.iter().map(|e| idx.entity_topic_score(e, t)).collect();
        factors.sort_by(|a, b| b.total_cmp(a));
        let floor = factors[nu - 1];
        let base = idx.log_rank_score(&b, t);
        let mut grown = b.clone();
        for w in WORDS {
            if !grown.entities.contains(w) && idx.entity_topic_score(w, t) <= floor {
                grown.entities.insert(w.to_string());
            }
        }
        prop_assert_eq!(idx.log_rank_score(&grown, t), base);
    }

    #[test]
    fn ranking_is_ordered_and_ties_break_by_id(tweets in corpus(), p in params(), probes in proptest::collection::vec(0u16..1024, 0..30), n in 0usize..40) {
        let idx = build(&tweets, p);
        let bags: Vec<EntityBag> = probes.iter().enumerate().map(|(i, &m)| bag(i, m)).collect();
        let ranked = idx.top_tweets("blue", &bags, n);
        prop_assert_eq!(ranked.len(), n.min(bags.len()));
        for w in ranked.windows(2) {
            prop_assert!(
                w[0].log_score > w[1].log_score
                    || (w[0].log_score == w[1].log_score && w[0].bag.tweet_id < w[1].bag.tweet_id)
            );
        }
        // The kept prefix is the best n of the full sort.
        let mut all: Vec<(f64, &str)> = bags.iter().map(|b| (idx.log_rank_score(b, "blue"), b.tweet_id.as_str())).collect();
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        let want: Vec<&str> = all.iter().take(n).map(|x| x.1).collect();
        let got: Vec<&str> = ranked.iter().map(|r| r.bag.tweet_id.as_str()).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn encoding_roundtrips(tweets in corpus(), p in params()) {
        let idx = build(&tweets, p);
        let bytes = idx.to_bytes();
        let back = TopicModelIndex::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &idx);
        prop_assert_eq!(back.to_bytes(), bytes);
    }
}
