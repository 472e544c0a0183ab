//! Accuracy tables: per-side 1000-bin histograms turned into a 0-100 score
//! that is interpolated for new predictions.
//!
//! Each bin gets a closeness value (1000 for the bin nearest the side's
//! optimal distance, 0 for right matches and 1 for wrong matches, counting
//! down to 1) plus a distribution value that starts at 1.0 in the first bin,
//! climbs by 0.5 per bin up to the histogram peak and falls by 0.5 per bin
//! after it. The sum is min-max rescaled to `[0, 100]`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{argmax, classify};
use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::io::{create, open};

pub const TABLE_BINS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Right,
    Wrong,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Right => "right",
            Side::Wrong => "wrong",
        }
    }

    pub fn for_label(label: Label) -> Self {
        match label {
            Label::Right => Side::Right,
            Label::Wrong => Side::Wrong,
        }
    }

    /// The distance span covered by this side's table.
    pub fn span(self, threshold: f64) -> (f64, f64) {
        match self {
            Side::Right => (0.0, threshold),
            Side::Wrong => (threshold, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub side: Side,
    pub threshold: f64,
    pub bin_edges: Vec<f64>,
    pub score: Vec<f64>,
    /// Only available on freshly built tables; not persisted.
    #[serde(skip)]
    pub distribution_scale: Vec<f64>,
}

/// Closeness values for one side: a strict ramp towards the optimal end.
pub fn closeness_scale(side: Side, n_bins: usize) -> Vec<u32> {
    let n = n_bins as u32;
    (0..n)
        .map(|i| match side {
            Side::Right => n - i,
            Side::Wrong => i + 1,
        })
        .collect()
}

/// 1.0 at bin 0, +0.5 per bin through `peak`, then -0.5 per bin.
pub fn distribution_scale(peak: usize, n_bins: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_bins);
    let mut value = 1.0;
    for i in 0..n_bins {
        if i > 0 {
            value += if i <= peak { 0.5 } else { -0.5 };
        }
        out.push(value);
    }
    out
}

/// Affine map sending the minimum to 0 and the maximum to 100.
pub fn rescale(values: &[f64]) -> Result<Vec<f64>> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.len() < 2 || max.is_nan() || max <= min {
        return Err(Error::DegenerateScale);
    }
    let range = max - min;
    Ok(values.iter().map(|v| (v - min) / range * 100.0).collect())
}

impl AccuracyTable {
    /// Builds the table for `side` from that side's distances.
    pub fn build(distances: &[f64], side: Side, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold {threshold} outside (0, 1)"
            )));
        }
        if distances.is_empty() {
            return Err(Error::EmptySide(side.name()));
        }
        let (lo, hi) = side.span(threshold);
        let width = (hi - lo) / TABLE_BINS as f64;
        let mut counts = vec![0.0; TABLE_BINS];
        for &d in distances {
            let on_side = match side {
                Side::Right => (0.0..threshold).contains(&d),
                Side::Wrong => (threshold..=1.0).contains(&d),
            };
            if !on_side {
                return Err(Error::WrongSideSample {
                    side: side.name(),
                    distance: d,
                    threshold,
                });
            }
            let bin = (((d - lo) / width) as usize).min(TABLE_BINS - 1);
            counts[bin] += 1.0;
        }
        let bin_edges: Vec<f64> = (0..=TABLE_BINS)
            .map(|i| lo + (hi - lo) * i as f64 / TABLE_BINS as f64)
            .collect();
        let dist = distribution_scale(argmax(&counts), TABLE_BINS);
        let combined: Vec<f64> = closeness_scale(side, TABLE_BINS)
            .iter()
            .zip(&dist)
            .map(|(&c, &d)| c as f64 + d)
            .collect();
        Ok(Self {
            side,
            threshold,
            bin_edges,
            score: rescale(&combined)?,
            distribution_scale: dist,
        })
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    pub fn closeness_scale(&self) -> Vec<u32> {
        closeness_scale(self.side, self.score.len())
    }

    /// Piecewise-linear interpolation of the score over bin centres,
    /// clamped to the end scores outside the centre range.
    pub fn interpolate(&self, distance: f64) -> f64 {
        let centers = self.bin_centers();
        let last = centers.len() - 1;
        if distance <= centers[0] {
            return self.score[0];
        }
        if distance >= centers[last] {
            return self.score[last];
        }
        let i = centers.partition_point(|&c| c <= distance) - 1;
        if centers[i] == distance {
            return self.score[i];
        }
        let t = (distance - centers[i]) / (centers[i + 1] - centers[i]);
        self.score[i] + t * (self.score[i + 1] - self.score[i])
    }

    fn validate(&self) -> Result<()> {
        if self.bin_edges.len() != self.score.len() + 1 || self.score.len() < 2 {
            return Err(Error::InvalidConfig(
                "accuracy table needs n+1 edges for n >= 2 scores".into(),
            ));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let table: Self = serde_json::from_reader(std::io::BufReader::new(open(path)?))?;
        table.validate()?;
        Ok(table)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub distance: f64,
    pub label: Label,
    pub accuracy_score: f64,
}

/// Labels `distance` against the threshold and scores it with that side's table.
pub fn score_prediction(
    distance: f64,
    threshold: f64,
    right_table: &AccuracyTable,
    wrong_table: &AccuracyTable,
) -> Result<ScoredPrediction> {
    for table in [right_table, wrong_table] {
        if table.threshold != threshold {
            return Err(Error::ThresholdMismatch {
                table: table.threshold,
                expected: threshold,
            });
        }
    }
    if right_table.side != Side::Right || wrong_table.side != Side::Wrong {
        return Err(Error::InvalidConfig(
            "accuracy tables passed in the wrong order".into(),
        ));
    }
    if !(0.0..=1.0).contains(&distance) {
        return Err(Error::OutOfRangeDistance(distance));
    }
    let label = classify(distance, threshold);
    let table = match label {
        Label::Right => right_table,
        Label::Wrong => wrong_table,
    };
    Ok(ScoredPrediction {
        distance,
        label,
        accuracy_score: table.interpolate(distance),
    })
}

/// Builds both tables from labelled calibration distances, splitting the
/// samples by which side of the threshold they fall on.
pub fn build_tables(distances: &[f64], threshold: f64) -> Result<(AccuracyTable, AccuracyTable)> {
    let (right, wrong): (Vec<f64>, Vec<f64>) = distances.iter().partition(|&&d| d < threshold);
    Ok((
        AccuracyTable::build(&right, Side::Right, threshold)?,
        AccuracyTable::build(&wrong, Side::Wrong, threshold)?,
    ))
}
