mod common;

use std::collections::{BTreeSet, HashSet};

use proptest::prelude::*;
use siamcal::calibration::{
    calibrate, classify, crossing_region, mislabel_rate, CalibrationConfig, ClassSamples,
};
use siamcal::dataset::{generate_negatives, sick_convert, SickLabel};
use siamcal::model::Gradients;
use siamcal::optim::clip_global_norm;
use siamcal::scoring::rescale;
use siamcal::text::{clean_text, toy_embed, CleaningConfig};
use siamcal::train::{fit, TrainConfig};
use siamcal::vector::{distance_slices, pair_output, squash, SquashKind};
use siamcal::{
    DistanceKind, EmbeddingRecord, EmbeddingStore, Label, PairExample, ProjectionModel, Vector,
};

use common::{labelled, KINDS};

fn vec_pair(max_dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_dim).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-10.0..10.0f64, n),
        )
    })
}

fn vec_triple(max_dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1..=max_dim).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-10.0..10.0f64, n),
        )
    })
}

fn label() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::Right), Just(Label::Wrong)]
}

/// Two classes drawn from overlapping uniform ranges.
fn mixture() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (0.2..0.8f64, 0.0..0.5f64, 20usize..200, 20usize..200).prop_flat_map(
        |(mid, overlap, nr, nw)| {
            let right_hi = (mid + overlap / 2.0).min(1.0);
            let wrong_lo = (mid - overlap / 2.0).max(0.0);
            (
                prop::collection::vec(0.0..right_hi, nr),
                prop::collection::vec(wrong_lo..=1.0, nw),
            )
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metric_axioms((x, y, z) in vec_triple(16)) {
        for kind in KINDS {
            let dxy = distance_slices(kind, &x, &y).unwrap();
            let dyx = distance_slices(kind, &y, &x).unwrap();
            let dxz = distance_slices(kind, &x, &z).unwrap();
            let dyz = distance_slices(kind, &y, &z).unwrap();
            prop_assert!(dxy >= 0.0);
            prop_assert_eq!(dxy, dyx);
            prop_assert_eq!(distance_slices(kind, &x, &x).unwrap(), 0.0);
            prop_assert!(dxz <= dxy + dyz + 1e-9 * (1.0 + dxz), "{kind}: {dxz} > {dxy} + {dyz}");
        }
    }

    #[test]
    fn minkowski_generalizes((x, y) in vec_pair(32)) {
        let manhattan = distance_slices(DistanceKind::Manhattan, &x, &y).unwrap();
        let m1 = distance_slices(DistanceKind::Minkowski(1), &x, &y).unwrap();
        prop_assert!((m1 - manhattan).abs() <= 1e-9 * (1.0 + manhattan));
        let euclid = distance_slices(DistanceKind::Euclidean, &x, &y).unwrap();
        let m2 = distance_slices(DistanceKind::Minkowski(2), &x, &y).unwrap();
        prop_assert!((m2 - euclid).abs() <= 1e-9 * (1.0 + euclid));
    }

    #[test]
    fn pair_output_in_unit_interval((x, y) in vec_pair(16), scale in 1e-3..1e6f64) {
        let x = Vector::new(x.iter().map(|v| v * scale).collect()).unwrap();
        let y = Vector::new(y.iter().map(|v| v * scale).collect()).unwrap();
        for kind in KINDS {
            let out = pair_output(kind, &x, &y).unwrap();
            prop_assert!((0.0..1.0).contains(&out));
        }
    }

    #[test]
    fn squash_monotone(d1 in 0.0..5.0f64, gap in 1e-9..5.0f64, far in 0.0..1e3f64) {
        let d2 = d1 + gap;
        prop_assert!(squash(SquashKind::Tanh, d1).unwrap() < squash(SquashKind::Tanh, d2).unwrap());
        prop_assert!(squash(SquashKind::NegExp, d1).unwrap() > squash(SquashKind::NegExp, d2).unwrap());
        prop_assert!(squash(SquashKind::Tanh, d2).unwrap() <= squash(SquashKind::Tanh, d2 + far).unwrap());
        prop_assert!(squash(SquashKind::NegExp, d2).unwrap() >= squash(SquashKind::NegExp, d2 + far).unwrap());
    }

    #[test]
    fn sick_convert_partitions(r in 0.0..=5.0f64) {
        let keep = sick_convert(r, false).unwrap();
        let drop = sick_convert(r, true).unwrap();
        let expected = if r > 3.0 { Label::Right } else { Label::Wrong };
        prop_assert_eq!(keep, SickLabel::Label(expected));
        if r > 2.0 && r <= 3.0 {
            prop_assert_eq!(drop, SickLabel::Filtered);
        } else {
            prop_assert_eq!(drop, keep);
        }
    }

    #[test]
    fn classify_is_monotone(d1 in 0.0..=1.0f64, d2 in 0.0..=1.0f64, t in 0.0..=1.0f64) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        if classify(lo, t) == Label::Wrong {
            prop_assert_eq!(classify(hi, t), Label::Wrong);
        }
    }

    #[test]
    fn rescale_is_idempotent(values in prop::collection::vec(-1e3..1e3f64, 2..50)) {
        prop_assume!(values.iter().any(|v| *v != values[0]));
        let once = rescale(&values).unwrap();
        let twice = rescale(&once).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        prop_assert!(once.contains(&0.0) && once.contains(&100.0));
    }

    #[test]
    fn tied_weights_symmetric(seed in any::<u64>(), a in prop::collection::vec(-1.0..1.0f64, 8), b in prop::collection::vec(-1.0..1.0f64, 8)) {
        for kind in KINDS {
            let model = ProjectionModel::glorot(8, 4, kind, seed).unwrap();
            prop_assert_eq!(model.predict(&a, &b).unwrap(), model.predict(&b, &a).unwrap());
        }
    }

    #[test]
    fn clip_bounds_global_norm(g in prop::collection::vec(-1.0..1.0f64, 1..40), scale in 0.0..1e3f64, clip in 0.1..10.0f64) {
        let split = g.len() / 2;
        let mut grads = Gradients {
            weights: g[..split].iter().map(|v| v * scale).collect(),
            bias: g[split..].iter().map(|v| v * scale).collect(),
        };
        let before = grads.clone();
        clip_global_norm(&mut grads, clip).unwrap();
        prop_assert!(grads.global_norm() <= clip + 1e-9);
        if before.global_norm() <= clip {
            prop_assert_eq!(grads, before);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn toy_embed_unit_norm(text in "[a-zA-Z0-9 ,.!?-]{0,80}", dim in 2usize..64, seed in any::<u64>()) {
        let v = toy_embed(&text, dim, seed).unwrap();
        // FNV-1a over the token bytes, keyed by the seed.
        let mut buckets = vec![0.0f64; dim];
        let cleaned = clean_text(&text, &CleaningConfig::default());
        for token in cleaned.split_whitespace() {
            let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
            for byte in token.bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            buckets[(h % dim as u64) as usize] += if h >> 63 == 1 { -1.0 } else { 1.0 };
        }
        let norm = buckets.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // no tokens, or signed collisions cancelled every slot
            prop_assert!(v.iter().all(|&x| x == 0.0));
        } else {
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
            for (got, raw) in v.iter().zip(&buckets) {
                prop_assert!((got - raw / norm).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn negatives_avoid_positives(
        n_drivers in 1usize..6,
        n_targets in 1usize..6,
        n_unmatched in 0usize..4,
        positive_mask in any::<u64>(),
        frac in 0.0..=1.0f64,
        seed in any::<u64>(),
    ) {
        let drivers: BTreeSet<String> = (0..n_drivers).map(|i| format!("d{i}")).collect();
        let mut targets: BTreeSet<String> = (0..n_targets).map(|i| format!("t{i}")).collect();
        let unmatched: BTreeSet<String> = (0..n_unmatched).map(|i| format!("u{i}")).collect();
        targets.extend(unmatched.iter().cloned());
        let mut positives = Vec::new();
        for (i, d) in drivers.iter().enumerate() {
            for (j, t) in (0..n_targets).map(|j| format!("t{j}")).enumerate() {
                if positive_mask >> ((i * 6 + j) % 64) & 1 == 1 {
                    positives.push(PairExample::new(d.clone(), t, Label::Right));
                }
            }
        }
        let available = drivers.len() * targets.len() - positives.len();
        let n = (available as f64 * frac).floor() as usize;
        let negatives = generate_negatives(&positives, &drivers, &targets, &unmatched, n, seed).unwrap();
        prop_assert_eq!(negatives.len(), n);
        let pos: HashSet<(String, String)> = positives.iter().map(|p| (p.driver_id.clone(), p.target_id.clone())).collect();
        let mut seen = HashSet::new();
        for neg in &negatives {
            let key = (neg.driver_id.clone(), neg.target_id.clone());
            prop_assert!(!pos.contains(&key));
            prop_assert!(drivers.contains(&neg.driver_id) && targets.contains(&neg.target_id));
            prop_assert_eq!(neg.label, Label::Wrong);
            prop_assert!(seen.insert(key));
        }
        let from_unmatched = negatives.iter().filter(|p| unmatched.contains(&p.target_id)).count();
        let unmatched_available = drivers.len() * unmatched.len();
        prop_assert!(from_unmatched >= n.div_ceil(2).min(unmatched_available));
        prop_assert_eq!(
            negatives,
            generate_negatives(&positives, &drivers, &targets, &unmatched, n, seed).unwrap()
        );
    }

    #[test]
    fn mislabel_rate_matches_brute_force((right, wrong) in mixture(), t in 0.0..=1.0f64) {
        let (d, l) = labelled(&right, &wrong);
        let (wrong_frac, right_frac) = mislabel_rate(&d, &l, t).unwrap();
        let wrong_below = wrong.iter().filter(|&&x| x < t).count();
        let right_above = right.iter().filter(|&&x| x >= t).count();
        prop_assert_eq!(wrong_frac, wrong_below as f64 / wrong.len() as f64);
        prop_assert_eq!(right_frac, right_above as f64 / right.len() as f64);
    }

    #[test]
    fn threshold_between_peaks((right, wrong) in mixture(), bins in 10usize..300) {
        let (d, l) = labelled(&right, &wrong);
        let config = CalibrationConfig { n_bins: bins, ..Default::default() };
        if let Ok((dp, result)) = calibrate(&d, &l, &config) {
            prop_assert!(dp.right_peak_center() < result.threshold);
            prop_assert!(result.threshold < dp.wrong_peak_center());
            let mass = |density: &[f64]| density.iter().sum::<f64>() * dp.bin_width();
            prop_assert!((mass(&dp.right_density) - 1.0).abs() < 1e-9);
            prop_assert!((mass(&dp.wrong_density) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn threshold_follows_increasing_maps((right, wrong) in mixture(), alpha in 0.1..=1.0f64, beta_frac in 0.0..=1.0f64) {
        let (d, l) = labelled(&right, &wrong);
        let Ok(region) = crossing_region(&ClassSamples::new(&d, &l).unwrap()) else {
            return Ok(());
        };
        let t = region.midpoint();

        // affine maps move the threshold with the samples
        let beta = (1.0 - alpha) * beta_frac;
        let mapped: Vec<f64> = d.iter().map(|x| alpha * x + beta).collect();
        let t_affine = crossing_region(&ClassSamples::new(&mapped, &l).unwrap()).unwrap().midpoint();
        prop_assert!((t_affine - (alpha * t + beta)).abs() < 1e-12);
        for (x, y) in d.iter().zip(&mapped) {
            if (x - t).abs() > 1e-9 {
                prop_assert_eq!(classify(*x, t), classify(*y, t_affine));
            }
        }

        // other monotone maps keep every sample outside the crossing region on its side
        let maps: [fn(f64) -> f64; 3] = [f64::sqrt, |x| x * x, |x| (x.exp() - 1.0) / (1f64.exp() - 1.0)];
        for f in maps {
            let mapped: Vec<f64> = d.iter().map(|&x| f(x)).collect();
            let t_mapped = crossing_region(&ClassSamples::new(&mapped, &l).unwrap()).unwrap().midpoint();
            for (x, y) in d.iter().zip(&mapped) {
                if *x <= region.lo || *x >= region.hi {
                    prop_assert_eq!(classify(*x, t), classify(*y, t_mapped));
                }
            }
        }
    }

    #[test]
    fn loss_invariant_under_reordering(
        seed in any::<u64>(),
        batch in prop::collection::vec((prop::collection::vec(-1.0..1.0f64, 6), prop::collection::vec(-1.0..1.0f64, 6), label()), 1..20)
            .prop_flat_map(|b| { let s = b.clone(); (Just(b), Just(s).prop_shuffle()) }),
    ) {
        let (ordered, shuffled) = batch;
        for kind in KINDS {
            let model = ProjectionModel::glorot(6, 3, kind, seed).unwrap();
            let (l1, g1) = model.loss_and_grad(&ordered).unwrap();
            let (l2, g2) = model.loss_and_grad(&shuffled).unwrap();
            prop_assert!((l1 - l2).abs() <= 1e-12 * (1.0 + l1));
            for (a, b) in g1.weights.iter().chain(&g1.bias).zip(g2.weights.iter().chain(&g2.bias)) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn best_epoch_has_minimum_validation_loss(seed in any::<u64>(), patience in 0usize..4) {
        let corpus = siamcal::synth::toy_corpus(120, seed).unwrap();
        let records = corpus
            .texts
            .iter()
            .map(|(id, text)| EmbeddingRecord { id: id.clone(), vector: toy_embed(text, 32, seed).unwrap() })
            .collect();
        let store = EmbeddingStore::from_records(records).unwrap();
        let config = TrainConfig { max_epochs: 12, patience, batch_size: 16, out_dim: 8, seed, ..Default::default() };
        let (_, history) = fit(&corpus.pairs, &store, DistanceKind::default(), &config).unwrap();
        let best = history.best_val_loss();
        prop_assert!(history.val_loss.iter().all(|&l| best <= l));
    }
}
