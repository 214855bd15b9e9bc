use std::collections::HashSet;

use edgetrain_core::corpus::{decode_request, encode_request, generate_synthetic, split, Label, SplitSpec, TrainingRequest};
use edgetrain_core::netlink::{transfer_time, LinkProfile};
use edgetrain_core::seed;
use edgetrain_core::textml::{
    fold_bounds, kfold_cv, tokenize, CvConfig, PacHyperParams, PacModel, SparseVector, TfIdfModel,
};
use proptest::prelude::*;

fn ids(records: &[edgetrain_core::DocumentRecord]) -> HashSet<usize> {
    records.iter().map(|r| r.id).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_are_disjoint(n in 6usize..300, test in 0.05f64..0.4, a in 0.1f64..0.3, b in 0.1f64..0.3, s in any::<u64>()) {
        let ds = generate_synthetic(n, 20, 0.1, 1).unwrap();
        let spec = SplitSpec { test_fraction: test, train_shards: vec![a, b], seed: s };
        let Ok(parts) = split(&ds, &spec) else { return Ok(()); };
        let mut seen = ids(&parts.test);
        let mut total = parts.test.len();
        for shard in &parts.shards {
            total += shard.len();
            for r in shard {
                prop_assert!(seen.insert(r.id), "id {} in two partitions", r.id);
            }
        }
        prop_assert_eq!(seen.len(), total);
        prop_assert!(total <= n);
        prop_assert!((parts.test.len() as f64 - test * n as f64).abs() <= 1.0);
    }

    #[test]
    fn full_split_covers_dataset(n in 5usize..300, s in any::<u64>()) {
        let ds = generate_synthetic(n, 20, 0.1, 2).unwrap();
        let spec = SplitSpec { test_fraction: 0.2, train_shards: vec![0.4, 0.4], seed: s };
        let parts = split(&ds, &spec).unwrap();
        let mut all = ids(&parts.test);
        all.extend(parts.shards.iter().flat_map(|sh| ids(sh)));
        prop_assert_eq!(all.len(), n);
    }

    #[test]
    fn request_round_trip(n in 1usize..60, folds in 2usize..10, c in 1e-4f64..10.0, epochs in 1u32..50, s in any::<u64>(), noise in 0.0f64..0.9) {
        let ds = generate_synthetic(n.max(2), 30, noise, s).unwrap();
        let shard = &ds.records()[..n];
        let cv = CvConfig { folds, grid: vec![PacHyperParams { c, epochs, shuffle_seed: s }], seed: s.rotate_left(7) };
        let bytes = encode_request(shard, &cv).unwrap();
        prop_assert_eq!(decode_request(&bytes).unwrap(), TrainingRequest::new(shard, &cv));
    }

    #[test]
    fn noise_free_generation_is_pool_pure(n in 2usize..80, vocab in 4usize..200, s in any::<u64>()) {
        let ds = generate_synthetic(n, vocab, 0.0, s).unwrap();
        let half = vocab / 2;
        for r in ds.records() {
            for tok in tokenize(&r.text) {
                let idx: usize = tok[1..].parse().unwrap();
                prop_assert_eq!(idx < half, r.label == Label::Real);
            }
        }
        let reals = ds.records().iter().filter(|r| r.label == Label::Real).count();
        prop_assert!((reals as i64 - (n - reals) as i64).abs() <= 1);
    }

    #[test]
    fn transform_norm_is_zero_or_one(docs in prop::collection::vec(prop::collection::vec(0u8..30, 0..20), 1..12), probe in prop::collection::vec(0u8..40, 0..25)) {
        let corpus: Vec<Vec<String>> = docs.iter().map(|d| d.iter().map(|t| format!("t{t}")).collect()).collect();
        let Ok(model) = TfIdfModel::fit(&corpus) else { return Ok(()); };
        prop_assert!(model.idf_values().iter().all(|&v| v >= 1.0));
        let tokens: Vec<String> = probe.iter().map(|t| format!("t{t}")).collect();
        let norm = model.transform(&tokens).norm();
        prop_assert!(norm == 0.0 || (norm - 1.0).abs() <= 1e-9, "norm {norm}");
    }

    #[test]
    fn pa_step_bounded_and_restores_margin(seed_val in any::<u64>(), c in 0.01f64..5.0) {
        use rand::Rng;
        let mut rng = seed::rng(seed_val);
        let mut model = PacModel::zeros(5, PacHyperParams::new(c, 1));
        for _ in 0..40 {
            let mut pairs = Vec::new();
            for i in 0..5 {
                if rng.random_bool(0.6) {
                    pairs.push((i, rng.random_range(-2.0..2.0)));
                }
            }
            let x = SparseVector::from_pairs(pairs);
            let y = if rng.random_bool(0.5) { Label::Real } else { Label::Fake };
            let tau = model.update(&x, y);
            prop_assert!(tau <= c);
            if tau > 0.0 && tau < c {
                let margin = y.sign() * model.score(&x);
                prop_assert!((margin - 1.0).abs() <= 1e-9, "margin {margin}");
            }
        }
    }

    #[test]
    fn folds_balanced(n in 2usize..500, k_raw in 2usize..500) {
        let k = k_raw.min(n);
        let b = fold_bounds(n, k);
        prop_assert_eq!(b.len(), k);
        prop_assert_eq!(b.first().unwrap().start, 0);
        prop_assert_eq!(b.last().unwrap().end, n);
        prop_assert!(b.windows(2).all(|w| w[0].end == w[1].start));
        let sizes: Vec<usize> = b.iter().map(|r| r.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn transfer_grows_with_packets(payload in 0usize..200_000, extra in 1usize..20, s in any::<u64>()) {
        let link = LinkProfile::new(0.002, 0.0005, 0.05, 5e6, 1448).unwrap();
        let small = transfer_time(&link, payload, &mut seed::rng(s));
        let more = transfer_time(&link, link.packets_for(payload) * 1448 + extra * 1448, &mut seed::rng(s));
        prop_assert!(more.duration > small.duration);
        prop_assert_eq!(small.packets_lost, small.packets_sent - link.packets_for(payload));
        prop_assert_eq!(transfer_time(&link, payload, &mut seed::rng(s)), small);
    }
}

#[test]
fn cv_is_deterministic_bit_for_bit() {
    let ds = generate_synthetic(90, 60, 0.3, 4).unwrap();
    let cfg = CvConfig::default().with_seed(77);
    let a = kfold_cv(ds.records(), &cfg).unwrap();
    let b = kfold_cv(ds.records(), &cfg).unwrap();
    for (x, y) in a.per_candidate.iter().zip(&b.per_candidate) {
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&x.fold_accuracies), bits(&y.fold_accuracies));
        assert_eq!(x.mean_accuracy.to_bits(), y.mean_accuracy.to_bits());
    }
    assert_eq!(a.best, b.best);
}
