use asv_fallback::monitor::{anomaly_score, calibrate_threshold, empirical_quantile, EmbeddingCache};
use proptest::prelude::*;

fn vectors(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), n)
        .prop_filter("non-zero", |vs| vs.iter().all(|v| v.iter().any(|x| x.abs() > 1e-3)))
}

proptest! {
    #[test]
    fn score_is_bounded_and_zero_on_members(vs in vectors(6, 5), probe in prop::collection::vec(-1.0f64..1.0, 5)) {
        let cache = EmbeddingCache::from_vectors(&vs).unwrap();
        for v in &vs {
            prop_assert!(anomaly_score(v, &cache).unwrap().abs() < 1e-12);
        }
        if probe.iter().any(|x| x.abs() > 1e-3) {
            let s = anomaly_score(&probe, &cache).unwrap();
            prop_assert!((-1e-12..=2.0 + 1e-12).contains(&s));
        }
    }

    #[test]
    fn growing_the_cache_never_raises_a_score(vs in vectors(8, 4), probe in prop::collection::vec(-1.0f64..1.0, 4)) {
        prop_assume!(probe.iter().any(|x| x.abs() > 1e-3));
        let mut prev = f64::INFINITY;
        for n in 1..=vs.len() {
            let cache = EmbeddingCache::from_vectors(&vs[..n]).unwrap();
            let s = anomaly_score(&probe, &cache).unwrap();
            prop_assert!(s <= prev + 1e-12);
            prev = s;
        }
    }

    #[test]
    fn threshold_is_monotone_in_alpha(vs in vectors(30, 6), a in 0.05f64..0.99, b in 0.05f64..0.99) {
        let cache = EmbeddingCache::from_vectors(&vs).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(calibrate_threshold(&cache, lo).unwrap() <= calibrate_threshold(&cache, hi).unwrap());
    }

    #[test]
    fn quantile_is_a_sample(scores in prop::collection::vec(0.0f64..2.0, 1..50), alpha in 0.01f64..0.99) {
        let q = empirical_quantile(&scores, alpha).unwrap();
        prop_assert!(scores.contains(&q));
        let below = scores.iter().filter(|&&s| s <= q).count() as f64;
        prop_assert!(below >= alpha * scores.len() as f64);
    }
}

#[test]
fn f32_cache_agrees_with_f64() {
    let vs: Vec<Vec<f64>> = (0..10).map(|i| (0..8).map(|j| ((i * 7 + j * 3) % 11) as f64 - 5.0).collect()).collect();
    let c64 = EmbeddingCache::from_vectors(&vs).unwrap();
    let vs32: Vec<Vec<f32>> = vs.iter().map(|v| v.iter().map(|&x| x as f32).collect()).collect();
    let c32 = EmbeddingCache::from_vectors(&vs32).unwrap();
    let probe = [1.0, -2.0, 0.5, 3.0, 0.0, 1.0, -1.0, 2.0];
    let probe32 = probe.map(|x| x as f32);
    let (s64, s32) = (anomaly_score(&probe, &c64).unwrap(), anomaly_score(&probe32, &c32).unwrap());
    assert!((s64 - s32 as f64).abs() < 1e-5);
}
