//! Real vectors, the Minkowski family of distances and the squash functions
//! that map a raw distance onto the unit interval.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this distance the gradient of `d` with respect to its inputs is taken as zero.
pub const DISTANCE_GRAD_EPS: f64 = 1e-12;

/// A non-empty vector of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidVector);
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scales to unit L2 norm; the zero vector is returned unchanged.
    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.0.iter_mut().for_each(|v| *v /= n);
        }
        self
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    Manhattan,
    Euclidean,
    Minkowski(u32),
}

impl Default for DistanceKind {
    fn default() -> Self {
        DistanceKind::Minkowski(3)
    }
}

impl DistanceKind {
    pub fn minkowski(p: u32) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidOrder(p));
        }
        Ok(DistanceKind::Minkowski(p))
    }

    /// Builds a kind from its lowercase name; `p` only matters for `minkowski`.
    pub fn from_name(name: &str, p: u32) -> Result<Self> {
        match name {
            "manhattan" => Ok(DistanceKind::Manhattan),
            "euclidean" => Ok(DistanceKind::Euclidean),
            "minkowski" => Self::minkowski(p),
            other => Err(Error::InvalidConfig(format!("unknown distance {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistanceKind::Manhattan => "manhattan",
            DistanceKind::Euclidean => "euclidean",
            DistanceKind::Minkowski(_) => "minkowski",
        }
    }

    pub fn order(&self) -> u32 {
        match *self {
            DistanceKind::Manhattan => 1,
            DistanceKind::Euclidean => 2,
            DistanceKind::Minkowski(p) => p,
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            DistanceKind::Minkowski(0) => Err(Error::InvalidOrder(0)),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceKind::Minkowski(p) => write!(f, "minkowski(p={p})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s, 3)
    }
}

fn check_dims(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(())
}

/// Distance between two equal-length slices, accumulated in `f64`.
pub fn distance_slices(kind: DistanceKind, x: &[f64], y: &[f64]) -> Result<f64> {
    kind.check()?;
    check_dims(x, y)?;
    let diffs = x.iter().zip(y).map(|(a, b)| (a - b).abs());
    let d = match kind {
        DistanceKind::Manhattan => diffs.sum(),
        DistanceKind::Euclidean => diffs.map(|v| v * v).sum::<f64>().sqrt(),
        DistanceKind::Minkowski(p) => {
            // Factor out the largest coordinate so |.|^p cannot overflow.
            let scale = diffs.clone().fold(0.0_f64, f64::max);
            if scale == 0.0 {
                0.0
            } else {
                let sum: f64 = diffs.map(|v| (v / scale).powi(p as i32)).sum();
                scale * sum.powf(1.0 / p as f64)
            }
        }
    };
    Ok(d)
}

pub fn distance(kind: DistanceKind, x: &Vector, y: &Vector) -> Result<f64> {
    distance_slices(kind, x, y)
}

/// Gradient of `d(x, y)` with respect to `x`, written into `out`.
///
/// The gradient with respect to `y` is `-out`. For `d` below
/// [`DISTANCE_GRAD_EPS`] the gradient is zero.
pub(crate) fn distance_grad_into(
    kind: DistanceKind,
    x: &[f64],
    y: &[f64],
    d: f64,
    out: &mut [f64],
) {
    if d <= DISTANCE_GRAD_EPS {
        out.iter_mut().for_each(|g| *g = 0.0);
        return;
    }
    let p = kind.order();
    for ((g, a), b) in out.iter_mut().zip(x).zip(y) {
        let diff = a - b;
        *g = match p {
            1 => sign(diff),
            2 => diff / d,
            // sign(diff) |diff|^(p-1) d^(1-p), computed as a ratio to stay in range
            _ => sign(diff) * (diff.abs() / d).powi(p as i32 - 1),
        };
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SquashKind {
    /// `tanh(d)`, output in `[0, 1)`; larger means less similar.
    #[default]
    Tanh,
    /// `exp(-d)`, output in `(0, 1]`; larger means more similar.
    NegExp,
}

/// Largest `f64` below 1; `tanh` rounds to 1.0 from about `d = 19.1`.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Squashes a distance into the unit interval, keeping the open end open.
pub fn squash(kind: SquashKind, d: f64) -> Result<f64> {
    if !d.is_finite() || d < 0.0 {
        return Err(Error::NegativeDistance(d));
    }
    Ok(match kind {
        SquashKind::Tanh => d.tanh().min(BELOW_ONE),
        SquashKind::NegExp => (-d).exp().max(f64::MIN_POSITIVE),
    })
}

/// The model output for a pair: `tanh(distance(kind, x, y))`.
pub fn pair_output(kind: DistanceKind, x: &Vector, y: &Vector) -> Result<f64> {
    squash(SquashKind::Tanh, distance(kind, x, y)?)
}
