#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use siamcal::{DistanceKind, Label, ProjectionModel};

pub const KINDS: [DistanceKind; 3] = [
    DistanceKind::Manhattan,
    DistanceKind::Euclidean,
    DistanceKind::Minkowski(3),
];

pub fn labelled(right: &[f64], wrong: &[f64]) -> (Vec<f64>, Vec<Label>) {
    let mut d = right.to_vec();
    d.extend_from_slice(wrong);
    let mut l = vec![Label::Right; right.len()];
    l.extend(vec![Label::Wrong; wrong.len()]);
    (d, l)
}

/// Right ~ N(0.3, 0.05), wrong ~ N(0.7, 0.05), clipped to [0, 1].
pub fn gaussian_mixture(n_per_class: usize, seed: u64) -> (Vec<f64>, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let right_dist = Normal::<f64>::new(0.3, 0.05).unwrap();
    let wrong_dist = Normal::<f64>::new(0.7, 0.05).unwrap();
    let right: Vec<f64> = (0..n_per_class)
        .map(|_| right_dist.sample(&mut rng).clamp(0.0, 1.0))
        .collect();
    let wrong: Vec<f64> = (0..n_per_class)
        .map(|_| wrong_dist.sample(&mut rng).clamp(0.0, 1.0))
        .collect();
    labelled(&right, &wrong)
}

/// Right ~ U[0, 0.6], wrong ~ U[0.4, 1.0].
pub fn uniform_overlap(n_per_class: usize, seed: u64) -> (Vec<f64>, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let right: Vec<f64> = (0..n_per_class).map(|_| rng.gen_range(0.0..=0.6)).collect();
    let wrong: Vec<f64> = (0..n_per_class).map(|_| rng.gen_range(0.4..=1.0)).collect();
    labelled(&right, &wrong)
}

/// Result of one finite-difference comparison over a model's parameters.
pub struct GradCheck {
    pub instances: usize,
    pub resampled: usize,
    pub max_rel_error: f64,
}

const FD_STEP: f64 = 1e-4;
const KINK_MARGIN: f64 = 1e-3;
/// Denominator floor so parameters with a (near-)zero gradient compare on
/// absolute error instead of dividing roundoff by zero.
const REL_FLOOR: f64 = 1e-7;

/// Smallest live `|u_k - v_k|` at which central differences are trusted.
/// Manhattan has a kink at zero. For Minkowski `p >= 3` the truncation error
/// relative to the gradient is about `h^2 (p-1)(p-2) / (6 delta^2)`; the margin
/// keeps that below 1e-5. Euclidean is smooth in `delta`.
fn delta_margin(kind: DistanceKind) -> f64 {
    match kind {
        DistanceKind::Manhattan => KINK_MARGIN,
        DistanceKind::Euclidean => 0.0,
        DistanceKind::Minkowski(p) if p >= 3 => {
            let p = p as f64;
            FD_STEP * ((p - 1.0) * (p - 2.0) / (6.0 * 1e-5)).sqrt()
        }
        DistanceKind::Minkowski(1) => KINK_MARGIN,
        DistanceKind::Minkowski(_) => 0.0,
    }
}

fn near_kink(model: &ProjectionModel, a: &[f64], b: &[f64]) -> bool {
    let c = model.forward_pair(a, b).unwrap();
    let relu_kink = c
        .pre_a
        .iter()
        .chain(&c.pre_b)
        .any(|z| z.abs() < KINK_MARGIN);
    let live = |k: usize| c.pre_a[k] > 0.0 || c.pre_b[k] > 0.0;
    let margin = delta_margin(model.distance_kind());
    let delta_kink = (0..c.u.len()).any(|k| live(k) && (c.u[k] - c.v[k]).abs() < margin);
    relu_kink || delta_kink || c.distance < 10.0 * KINK_MARGIN
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares analytic gradients with central differences on `n` random
/// smooth instances of a (in_dim, out_dim) model.
pub fn gradient_check(
    kind: DistanceKind,
    n: usize,
    in_dim: usize,
    out_dim: usize,
    seed: u64,
) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheck {
        instances: 0,
        resampled: 0,
        max_rel_error: 0.0,
    };
    while report.instances < n {
        let weights: Vec<f64> = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let bias: Vec<f64> = (0..out_dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let a: Vec<f64> = (0..in_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..in_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let label = if rng.gen_bool(0.5) {
            Label::Right
        } else {
            Label::Wrong
        };
        let model =
            ProjectionModel::from_parts(in_dim, out_dim, weights.clone(), bias.clone(), kind)
                .unwrap();
        if near_kink(&model, &a, &b) {
            report.resampled += 1;
            continue;
        }
        let batch = [(a.as_slice(), b.as_slice(), label)];
        let (_, grads) = model.loss_and_grad(&batch).unwrap();
        let loss_at = |w: &[f64], bb: &[f64]| {
            ProjectionModel::from_parts(in_dim, out_dim, w.to_vec(), bb.to_vec(), kind)
                .unwrap()
                .loss_and_grad(&batch)
                .unwrap()
                .0
        };
        for i in 0..weights.len() {
            let (mut plus, mut minus) = (weights.clone(), weights.clone());
            plus[i] += FD_STEP;
            minus[i] -= FD_STEP;
            let numeric = (loss_at(&plus, &bias) - loss_at(&minus, &bias)) / (2.0 * FD_STEP);
            report.max_rel_error = report
                .max_rel_error
                .max(rel_error(grads.weights[i], numeric));
        }
        for i in 0..bias.len() {
            let (mut plus, mut minus) = (bias.clone(), bias.clone());
            plus[i] += FD_STEP;
            minus[i] -= FD_STEP;
            let numeric = (loss_at(&weights, &plus) - loss_at(&weights, &minus)) / (2.0 * FD_STEP);
            report.max_rel_error = report.max_rel_error.max(rel_error(grads.bias[i], numeric));
        }
        report.instances += 1;
    }
    report
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_siamcal")
}

pub fn siamcal(args: &[&str]) -> std::process::Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn siamcal_ok(args: &[&str]) {
    let out = siamcal(args);
    assert!(
        out.status.success(),
        "siamcal {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Runs the full pipeline from toy corpus to report inside `dir`.
pub fn toy_pipeline(dir: &Path, n_pairs: usize, seed: u64, extra_train: &[&str]) {
    let d = dir.to_str().unwrap();
    let (texts, pairs, emb, model) = (
        format!("{d}/texts.tsv"),
        format!("{d}/pairs.csv"),
        format!("{d}/emb.jsonl"),
        format!("{d}/model.json"),
    );
    let seed = seed.to_string();
    let n_pairs = n_pairs.to_string();
    siamcal_ok(&[
        "toy-corpus",
        "--out",
        d,
        "--n-pairs",
        &n_pairs,
        "--seed",
        &seed,
    ]);
    siamcal_ok(&[
        "embed-toy",
        "--input",
        &texts,
        "--embeddings",
        &emb,
        "--dim",
        "512",
        "--seed",
        &seed,
    ]);
    let mut train = vec![
        "train",
        "--embeddings",
        &emb,
        "--pairs",
        &pairs,
        "--model",
        &model,
        "--seed",
        &seed,
    ];
    train.extend_from_slice(extra_train);
    siamcal_ok(&train);
    let inputs = ["--embeddings", &emb, "--pairs", &pairs, "--model", &model];
    siamcal_ok(&[&["calibrate", "--out", d][..], &inputs].concat());
    siamcal_ok(&[&["score", "--tables", d, "--out", d][..], &inputs].concat());
    siamcal_ok(&["report", "--tables", d, "--out", d]);
}

pub const PIPELINE_FILES: [&str; 10] = [
    "texts.tsv",
    "pairs.csv",
    "emb.jsonl",
    "model.json",
    "calibration.json",
    "densities.csv",
    "right_table.json",
    "wrong_table.json",
    "scores.csv",
    "report.svg",
];
