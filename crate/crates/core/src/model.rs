//! The tied-weight projection head: `u = ReLU(W a + b)`, output `tanh(d(u, v))`.

use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::io::{create, open};
use crate::train::TrainHistory;
use crate::vector::{distance_grad_into, distance_slices, squash, DistanceKind, SquashKind};

pub const DEFAULT_IN_DIM: usize = 512;
pub const DEFAULT_OUT_DIM: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    distance: DistanceKind,
}

/// Gradients with the same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &ProjectionModel) -> Self {
        Self {
            weights: vec![0.0; model.weights.len()],
            bias: vec![0.0; model.bias.len()],
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.bias)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.weights
            .iter_mut()
            .chain(self.bias.iter_mut())
            .for_each(|g| *g *= s);
    }
}

/// Intermediates of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub pre_a: Vec<f64>,
    pub pre_b: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub distance: f64,
    pub output: f64,
}

impl ProjectionModel {
    /// Builds a model from explicit parameters.
    pub fn from_parts(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        distance: DistanceKind,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidConfig(
                "model dimensions must be positive".into(),
            ));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::DimensionMismatch {
                expected: in_dim * out_dim,
                found: weights.len(),
            });
        }
        if bias.len() != out_dim {
            return Err(Error::DimensionMismatch {
                expected: out_dim,
                found: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig("non-finite model parameter".into()));
        }
        DistanceKind::from_name(distance.name(), distance.order())?;
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            distance,
        })
    }

    /// Glorot-uniform weights and zero bias.
    pub fn glorot(
        in_dim: usize,
        out_dim: usize,
        distance: DistanceKind,
        seed: u64,
    ) -> Result<Self> {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..in_dim * out_dim)
            .map(|_| dist.sample(&mut rng))
            .collect();
        Self::from_parts(in_dim, out_dim, weights, vec![0.0; out_dim], distance)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn distance_kind(&self) -> DistanceKind {
        self.distance
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights, &mut self.bias)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_dim {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-activation `W x + b`. Zero input coordinates are skipped, which
    /// makes sparse embeddings cheap.
    fn affine(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(self.in_dim)) {
                *o += row[j] * xj;
            }
        }
        out
    }

    /// Projects one embedding through the dense ReLU layer.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.affine(x).into_iter().map(relu).collect())
    }

    pub fn forward_pair(&self, a: &[f64], b: &[f64]) -> Result<ForwardCache> {
        self.check_input(a)?;
        self.check_input(b)?;
        let pre_a = self.affine(a);
        let pre_b = self.affine(b);
        let u: Vec<f64> = pre_a.iter().copied().map(relu).collect();
        let v: Vec<f64> = pre_b.iter().copied().map(relu).collect();
        let distance = distance_slices(self.distance, &u, &v)?;
        Ok(ForwardCache {
            pre_a,
            pre_b,
            u,
            v,
            distance,
            output: squash(SquashKind::Tanh, distance)?,
        })
    }

    /// Model output in `[0, 1)`.
    pub fn predict(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        Ok(self.forward_pair(a, b)?.output)
    }

    /// Mean squared error over the batch and its gradient with respect to
    /// the shared parameters; both siamese branches accumulate into the same
    /// gradient.
    pub fn loss_and_grad<A: AsRef<[f64]>>(
        &self,
        batch: &[(A, A, Label)],
    ) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = batch.len() as f64;
        let mut grads = Gradients::zeros_like(self);
        let mut loss = 0.0;
        let mut dd_du = vec![0.0; self.out_dim];
        for (a, b, label) in batch {
            let (a, b) = (a.as_ref(), b.as_ref());
            let cache = self.forward_pair(a, b)?;
            let err = cache.output - label.as_f64();
            loss += err * err;
            let dl_dd = 2.0 * err / n * (1.0 - cache.output * cache.output);
            if dl_dd == 0.0 {
                continue;
            }
            distance_grad_into(
                self.distance,
                &cache.u,
                &cache.v,
                cache.distance,
                &mut dd_du,
            );
            // d/dv = -d/du
            for (branch, (pre, sign)) in [(a, (&cache.pre_a, 1.0)), (b, (&cache.pre_b, -1.0))] {
                for (k, (&z, &g)) in pre.iter().zip(&dd_du).enumerate() {
                    if z <= 0.0 || g == 0.0 {
                        continue;
                    }
                    let delta = sign * dl_dd * g;
                    grads.bias[k] += delta;
                    let row = &mut grads.weights[k * self.in_dim..(k + 1) * self.in_dim];
                    for (w, &x) in row.iter_mut().zip(branch) {
                        *w += delta * x;
                    }
                }
            }
        }
        Ok((loss / n, grads))
    }

    pub fn to_file(&self, seed: u64, history: Option<&TrainHistory>) -> ModelFile {
        ModelFile {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            weights: self.weights.clone(),
            bias: self.bias.clone(),
            distance_kind: self.distance.name().to_owned(),
            p: self.distance.order(),
            seed,
            history: history.cloned(),
        }
    }

    pub fn save(&self, path: &Path, seed: u64, history: Option<&TrainHistory>) -> Result<()> {
        self.to_file(seed, history).save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ModelFile::load(path)?.into_model()
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// On-disk model representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub distance_kind: String,
    pub p: u32,
    pub seed: u64,
    #[serde(default)]
    pub history: Option<TrainHistory>,
}

impl ModelFile {
    pub fn into_model(self) -> Result<ProjectionModel> {
        let kind = DistanceKind::from_name(&self.distance_kind, self.p)?;
        ProjectionModel::from_parts(self.in_dim, self.out_dim, self.weights, self.bias, kind)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        std::io::Write::flush(&mut w).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(open(
            path,
        )?))?)
    }
}
