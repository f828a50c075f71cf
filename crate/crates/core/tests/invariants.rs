mod common;

use std::collections::HashSet;

use molgen::analysis::{cramers_v, davies_bouldin, spearman, ContingencyTable};
use molgen::decoding::{candidates, masked_softmax, Strategy as Sampling};
use molgen::editing::{correlation_mask, mask_monotonicity_audit, mu_grid};
use molgen::fingerprints::{tanimoto, Fingerprint};
use molgen::metrics::{fcd, intdiv};
use molgen::numerics::{info_nce_value, kl_value, GaussianPosterior, LogitScale, SplitMix64, Tensor};
use molgen::scaffolds::{dedup_scaffolds, levenshtein, levenshtein_bounded, scaffold_split, Split};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-3.0..3.0f64, rows * cols).prop_map(move |d| Tensor::new(vec![rows, cols], d).unwrap())
}

fn word() -> impl Strategy<Value = String> {
    "[cCN1()=O]{0,12}"
}

fn distribution() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u32..20, 1..12).prop_filter_map("all zero", |w| {
        let total: u32 = w.iter().sum();
        (total > 0).then(|| w.iter().map(|&x| x as f64 / total as f64).collect())
    })
}

fn fingerprint() -> impl Strategy<Value = Fingerprint> {
    prop::collection::vec(0usize..64, 1..20).prop_map(|bits| Fingerprint::from_bits(64, &bits))
}

proptest! {
    #[test]
    fn kl_nonnegative(mu in matrix(2, 3), lv in matrix(2, 3)) {
        let kl = kl_value(&GaussianPosterior::new(mu, lv).unwrap()).unwrap();
        prop_assert!(kl >= 0.0);
    }

    #[test]
    fn info_nce_row_permutation(z in matrix(4, 3), perm in Just((0..4).collect::<Vec<usize>>()).prop_shuffle()) {
        prop_assume!(z.to_rows().iter().all(|r| r.iter().map(|v| v * v).sum::<f64>() > 1e-6));
        let rows = z.to_rows();
        let p = Tensor::from_rows(&perm.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>()).unwrap();
        let scale = LogitScale::from_multiplier(5.0);
        let a = info_nce_value(&z, &z, scale).unwrap();
        let b = info_nce_value(&p, &p, scale).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn info_nce_clamped_above_cap(z in matrix(3, 2), raw in 4.7f64..1e6) {
        prop_assume!(z.to_rows().iter().all(|r| r.iter().map(|v| v * v).sum::<f64>() > 1e-6));
        let capped = info_nce_value(&z, &z, LogitScale::from_multiplier(100.0)).unwrap();
        let v = info_nce_value(&z, &z, LogitScale { raw }).unwrap();
        prop_assert!((v - capped).abs() < 1e-9);
    }

    #[test]
    fn levenshtein_metric(a in word(), b in word(), c in word()) {
        let ab = levenshtein(&a, &b);
        prop_assert_eq!(ab, common::levenshtein_oracle(&a, &b));
        prop_assert_eq!(ab, levenshtein(&b, &a));
        prop_assert!(levenshtein(&a, &c) <= ab + levenshtein(&b, &c));
        prop_assert_eq!(levenshtein(&a, &a), 0);
        for max in 0..4 {
            prop_assert_eq!(levenshtein_bounded(&a, &b, max), (ab <= max).then_some(ab));
        }
    }

    #[test]
    fn dedup_is_separated(keys in prop::collection::vec(word(), 0..40), min_dist in 1usize..5) {
        let kept = dedup_scaffolds(&keys, min_dist);
        prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
        for (x, &i) in kept.iter().enumerate() {
            for &j in &kept[x + 1..] {
                prop_assert!(levenshtein(&keys[i], &keys[j]) >= min_dist);
            }
        }
    }

    #[test]
    fn split_sizes_and_disjointness(sizes in prop::collection::vec(1usize..6, 5..30), seed in any::<u64>()) {
        let keys: Vec<String> = sizes.iter().enumerate().flat_map(|(g, &n)| std::iter::repeat_n(format!("k{g}"), n)).collect();
        let valid_n = keys.len() / 5;
        let test_n = keys.len() / 6;
        if let Ok(split) = scaffold_split(&keys, valid_n, test_n, seed) {
            prop_assert_eq!(split.count(Split::Valid), valid_n);
            prop_assert_eq!(split.count(Split::Test), test_n);
            for i in 0..keys.len() {
                for j in 0..keys.len() {
                    if keys[i] == keys[j] {
                        prop_assert_eq!(split.labels[i], split.labels[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn top_p_matches_prefix(probs in distribution(), p in 0.01f64..=1.0) {
        let got: Vec<usize> = candidates(&probs, Sampling::TopP(p)).unwrap().iter().map(|c| c.0).collect();
        prop_assert_eq!(got, common::top_p_oracle(&probs, p));
    }

    #[test]
    fn top_k_keeps_the_largest(probs in distribution(), k in 1usize..6) {
        let got = candidates(&probs, Sampling::TopK(k)).unwrap();
        prop_assert_eq!(got.len(), k.min(probs.iter().filter(|&&q| q > 0.0).count()));
        let min_kept = got.iter().map(|c| probs[c.0]).fold(f64::INFINITY, f64::min);
        let ids: HashSet<usize> = got.iter().map(|c| c.0).collect();
        for (i, &q) in probs.iter().enumerate() {
            if !ids.contains(&i) {
                prop_assert!(q <= min_kept);
            }
        }
        let total: f64 = got.iter().map(|c| c.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn banned_tokens_get_zero(logits in prop::collection::vec(-5.0..5.0f64, 2..10), ban in 0usize..10) {
        let ban = ban % logits.len();
        let p = masked_softmax(&logits, &[ban]);
        prop_assert_eq!(p[ban], 0.0);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tanimoto_bounds(a in fingerprint(), b in fingerprint()) {
        let s = tanimoto(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, tanimoto(&b, &a).unwrap());
        prop_assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn intdiv_matches_brute_force(fps in prop::collection::vec(fingerprint(), 2..20)) {
        let got = intdiv(&fps).unwrap();
        prop_assert!((got - common::intdiv_oracle(&fps)).abs() <= 1e-12);
    }

    #[test]
    fn fcd_self_is_zero(rows in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 3), 10..40)) {
        prop_assert!(fcd(&rows, &rows).unwrap() < 1e-6);
    }

    #[test]
    fn cramers_v_in_unit_interval(rows in prop::collection::vec(0usize..3, 20..80), seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let cols: Vec<usize> = rows.iter().map(|_| rand::Rng::random_range(&mut rng, 0..3)).collect();
        if let Ok(v) = cramers_v(&ContingencyTable::from_labels(&rows, &cols)) {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        }
        if let Ok(v) = cramers_v(&ContingencyTable::from_labels(&rows, &rows)) {
            prop_assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn davies_bouldin_scale_and_shift(points in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 2), 12..30), s in 0.01f64..100.0, shift in -10.0..10.0f64) {
        let groups: Vec<usize> = (0..points.len()).map(|i| i % 3).collect();
        if let Ok(base) = davies_bouldin(&points, &groups) {
            let moved: Vec<Vec<f64>> = points.iter().map(|r| r.iter().map(|x| x * s + shift).collect()).collect();
            let db = davies_bouldin(&moved, &groups).unwrap();
            prop_assert!((db - base).abs() <= 1e-9 * base.max(1.0));
        }
    }

    #[test]
    fn spearman_is_rank_invariant(x in prop::collection::vec(-10.0..10.0f64, 3..30)) {
        let y: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0).collect();
        if let Ok(r) = spearman(&x, &y) {
            prop_assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn correlation_mask_monotone(vals in prop::collection::vec(-1.0..1.0f64, 16), target in 0usize..4) {
        let corr: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { vals[4 * i.min(j) + i.max(j)] }).collect())
            .collect();
        let grid = mu_grid(21);
        let audit = mask_monotonicity_audit(&corr, target, &grid).unwrap();
        prop_assert!(audit.masked.windows(2).all(|w| w[1] <= w[0]));
        for &mu in &grid {
            prop_assert!(!correlation_mask(&corr, target, mu)[target]);
        }
        let zero = correlation_mask(&corr, target, 0.0);
        prop_assert!((0..4).all(|j| zero[j] == (j != target)));
    }
}
