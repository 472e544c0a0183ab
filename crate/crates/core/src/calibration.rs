//! Per-class distance distributions and the crossing-point threshold.
//!
//! The threshold is the cut `t` (right match iff `d < t`) at which the two
//! per-class normalised densities cross. It is located as the minimiser of
//! the equal-weight error
//!
//! ```text
//! E(t) = F_wrong(t) + 1 - F_right(t)
//! ```
//!
//! whose derivative is `f_wrong(t) - f_right(t)`. `E` is evaluated exactly on
//! the empirical distribution functions. Where the densities coincide over
//! an interval `E` is flat up to sampling noise, so every cut within
//! [`noise_tolerance`] of the minimum is treated as part of the crossing and
//! the threshold is the centre of that set. For separated classes the set is
//! the gap between them and the threshold is the gap midpoint.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::io::{create, open};
use crate::vector::DistanceKind;

pub const DEFAULT_BINS: usize = 200;

/// Distances of one labelled sample set, split by class and sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSamples {
    right: Vec<f64>,
    wrong: Vec<f64>,
}

impl ClassSamples {
    pub fn new(distances: &[f64], labels: &[Label]) -> Result<Self> {
        if distances.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: distances.len(),
                found: labels.len(),
            });
        }
        let mut right = Vec::new();
        let mut wrong = Vec::new();
        for (&d, &label) in distances.iter().zip(labels) {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::OutOfRangeDistance(d));
            }
            match label {
                Label::Right => right.push(d),
                Label::Wrong => wrong.push(d),
            }
        }
        if right.is_empty() || wrong.is_empty() {
            return Err(Error::SingleClassInput);
        }
        right.sort_by(f64::total_cmp);
        wrong.sort_by(f64::total_cmp);
        Ok(Self { right, wrong })
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    pub fn wrong(&self) -> &[f64] {
        &self.wrong
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionPair {
    pub bin_edges: Vec<f64>,
    pub right_density: Vec<f64>,
    pub wrong_density: Vec<f64>,
    pub right_peak_bin: usize,
    pub wrong_peak_bin: usize,
    pub right_count: usize,
    pub wrong_count: usize,
}

impl DistributionPair {
    pub fn n_bins(&self) -> usize {
        self.right_density.len()
    }

    pub fn bin_width(&self) -> f64 {
        1.0 / self.n_bins() as f64
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        0.5 * (self.bin_edges[i] + self.bin_edges[i + 1])
    }

    pub fn right_peak_center(&self) -> f64 {
        self.bin_center(self.right_peak_bin)
    }

    pub fn wrong_peak_center(&self) -> f64 {
        self.bin_center(self.wrong_peak_bin)
    }

    /// Writes `bin_center,right_density,wrong_density` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["bin_center", "right_density", "wrong_density"])?;
        for i in 0..self.n_bins() {
            w.write_record([
                self.bin_center(i).to_string(),
                self.right_density[i].to_string(),
                self.wrong_density[i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Index of the uniform `[0, 1]` bin holding `d`; `d = 1` goes to the last bin.
pub fn bin_index(d: f64, n_bins: usize) -> usize {
    ((d * n_bins as f64) as usize).min(n_bins - 1)
}

fn density(samples: &[f64], n_bins: usize, smooth: bool) -> Vec<f64> {
    let mut counts = vec![0.0; n_bins];
    for &d in samples {
        counts[bin_index(d, n_bins)] += 1.0;
    }
    if smooth && n_bins > 1 {
        counts = (0..n_bins)
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(n_bins - 1);
                counts[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect();
    }
    let width = 1.0 / n_bins as f64;
    let mass: f64 = counts.iter().sum::<f64>() * width;
    counts.iter().map(|c| c / mass).collect()
}

/// First index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-class density histograms over a shared uniform binning of `[0, 1]`.
///
/// With `smooth`, counts go through a centred moving average of width 3
/// (edge bins average their available neighbours) before normalisation.
/// Peaks are located after smoothing.
pub fn build_distributions(
    samples: &ClassSamples,
    n_bins: usize,
    smooth: bool,
) -> Result<DistributionPair> {
    if n_bins == 0 {
        return Err(Error::InvalidConfig("n_bins must be >= 1".into()));
    }
    let bin_edges = (0..=n_bins).map(|i| i as f64 / n_bins as f64).collect();
    let right_density = density(&samples.right, n_bins, smooth);
    let wrong_density = density(&samples.wrong, n_bins, smooth);
    Ok(DistributionPair {
        bin_edges,
        right_peak_bin: argmax(&right_density),
        wrong_peak_bin: argmax(&wrong_density),
        right_density,
        wrong_density,
        right_count: samples.right.len(),
        wrong_count: samples.wrong.len(),
    })
}

/// Sampling-noise allowance on the equal-weight error, capped at 0.25.
pub fn noise_tolerance(n_right: usize, n_wrong: usize) -> f64 {
    (2.0 * (1.0 / n_right as f64 + 1.0 / n_wrong as f64).sqrt()).min(0.25)
}

/// The set of near-optimal cuts, as the open/closed value interval `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingRegion {
    pub lo: f64,
    pub hi: f64,
    pub min_error: f64,
}

impl CrossingRegion {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Locates the region of cuts whose equal-weight error lies within the
/// noise tolerance of its minimum.
pub fn crossing_region(samples: &ClassSamples) -> Result<CrossingRegion> {
    let (right, wrong) = (&samples.right, &samples.wrong);
    let (nr, nw) = (right.len() as f64, wrong.len() as f64);
    let tol = noise_tolerance(right.len(), wrong.len());

    // Merge the sorted classes; a cut in (values[j], values[j + 1]] puts
    // everything <= values[j] on the right-match side.
    let mut values = Vec::with_capacity(right.len() + wrong.len());
    let mut errors = Vec::with_capacity(values.capacity());
    let (mut i, mut k) = (0, 0);
    while i < right.len() || k < wrong.len() {
        let v = match (right.get(i), wrong.get(k)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < right.len() && right[i] == v {
            i += 1;
        }
        while k < wrong.len() && wrong[k] == v {
            k += 1;
        }
        values.push(v);
        errors.push(k as f64 / nw + 1.0 - i as f64 / nr);
    }

    let min_error = errors.iter().copied().fold(f64::INFINITY, f64::min);
    // Cuts below every sample or above every sample score exactly 1.
    if min_error >= 1.0 - tol {
        let max_error = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Err(if max_error > 1.0 + tol {
            Error::DistributionsInverted
        } else {
            Error::NoCrossing
        });
    }
    let first = errors
        .iter()
        .position(|&e| e <= min_error + tol)
        .expect("minimum is attained");
    let last = errors
        .iter()
        .rposition(|&e| e <= min_error + tol)
        .expect("minimum is attained");
    // The last value always scores 1 and so is never selected.
    Ok(CrossingRegion {
        lo: values[first],
        hi: values[last + 1],
        min_error,
    })
}

/// Threshold at the crossing of the right- and wrong-match distributions.
pub fn find_threshold(samples: &ClassSamples) -> Result<f64> {
    Ok(crossing_region(samples)?.midpoint())
}

/// `0` (right) below the threshold, `1` (wrong) at or above it.
pub fn classify(distance: f64, threshold: f64) -> Label {
    if distance < threshold {
        Label::Right
    } else {
        Label::Wrong
    }
}

/// Fractions of wrong matches below the threshold and right matches at or above it.
pub fn mislabel_rate(distances: &[f64], labels: &[Label], threshold: f64) -> Result<(f64, f64)> {
    let samples = ClassSamples::new(distances, labels)?;
    Ok(mislabel_rate_split(&samples, threshold))
}

fn mislabel_rate_split(samples: &ClassSamples, threshold: f64) -> (f64, f64) {
    let wrong_below = samples.wrong.partition_point(|&d| d < threshold);
    let right_below = samples.right.partition_point(|&d| d < threshold);
    (
        wrong_below as f64 / samples.wrong.len() as f64,
        (samples.right.len() - right_below) as f64 / samples.right.len() as f64,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub threshold: f64,
    pub mislabeled_wrong_fraction: f64,
    pub mislabeled_right_fraction: f64,
    pub n_bins: usize,
    pub distance_kind: String,
    pub p: u32,
}

impl CalibrationResult {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(open(
            path,
        )?))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalibrationConfig {
    pub n_bins: usize,
    pub smooth: bool,
    pub distance: DistanceKind,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            n_bins: DEFAULT_BINS,
            smooth: true,
            distance: DistanceKind::default(),
        }
    }
}

/// Builds the distributions, finds the threshold and measures mislabel rates.
pub fn calibrate(
    distances: &[f64],
    labels: &[Label],
    config: &CalibrationConfig,
) -> Result<(DistributionPair, CalibrationResult)> {
    let samples = ClassSamples::new(distances, labels)?;
    let dp = build_distributions(&samples, config.n_bins, config.smooth)?;
    let threshold = find_threshold(&samples)?;
    if dp.right_peak_bin >= dp.wrong_peak_bin {
        return Err(Error::DistributionsInverted);
    }
    if !(dp.right_peak_center() < threshold && threshold < dp.wrong_peak_center()) {
        return Err(Error::NoCrossing);
    }
    let (wrong, right) = mislabel_rate_split(&samples, threshold);
    Ok((
        dp,
        CalibrationResult {
            threshold,
            mislabeled_wrong_fraction: wrong,
            mislabeled_right_fraction: right,
            n_bins: config.n_bins,
            distance_kind: config.distance.name().to_owned(),
            p: config.distance.order(),
        },
    ))
}
