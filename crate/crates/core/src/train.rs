//! Mini-batch training of the projection head with early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, PairExample};
use crate::error::{Error, Result};
use crate::io::EmbeddingStore;
use crate::model::{ProjectionModel, DEFAULT_OUT_DIM};
use crate::optim::{Adam, AdamConfig};
use crate::vector::DistanceKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub out_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            clip_norm: 2.0,
            batch_size: 512,
            max_epochs: 100,
            patience: 10,
            validation_fraction: 0.2,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-7,
            out_dim: DEFAULT_OUT_DIM,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_owned()));
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be > 0");
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return bad("clip_norm must be > 0");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.out_dim == 0 {
            return bad("out_dim must be >= 1");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
            clip_norm: Some(self.clip_norm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// Zero-based index of the epoch with the lowest validation loss.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.val_loss.len()
    }

    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch]
    }

    pub fn best_val_accuracy(&self) -> f64 {
        self.val_accuracy[self.best_epoch]
    }
}

type Example<'a> = (&'a [f64], &'a [f64], Label);

/// Resolves pair ids to embedding slices.
pub fn resolve<'a>(pairs: &[PairExample], store: &'a EmbeddingStore) -> Result<Vec<Example<'a>>> {
    pairs
        .iter()
        .map(|p| {
            Ok((
                store.get(&p.driver_id)?.as_slice(),
                store.get(&p.target_id)?.as_slice(),
                p.label,
            ))
        })
        .collect()
}

/// Seeded stratified split; returns `(train, validation)` indices.
pub fn stratified_split(labels: &[Label], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [Label::Right, Label::Wrong] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_val = if idx.len() >= 2 {
            ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1)
        } else {
            0
        };
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Mean squared error and accuracy (output rounded at 0.5) over `examples`.
pub fn evaluate(model: &ProjectionModel, examples: &[Example<'_>]) -> Result<(f64, f64)> {
    if examples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for &(a, b, label) in examples {
        let y = model.predict(a, b)?;
        let err = y - label.as_f64();
        loss += err * err;
        if (y >= 0.5) == (label == Label::Wrong) {
            correct += 1;
        }
    }
    let n = examples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Trains a fresh Glorot-initialised model on `pairs`.
pub fn fit(
    pairs: &[PairExample],
    store: &EmbeddingStore,
    distance: DistanceKind,
    config: &TrainConfig,
) -> Result<(ProjectionModel, TrainHistory)> {
    config.validate()?;
    let examples = resolve(pairs, store)?;
    let labels: Vec<Label> = examples.iter().map(|e| e.2).collect();
    if !labels.contains(&Label::Right) || !labels.contains(&Label::Wrong) {
        return Err(Error::SingleClassDataset);
    }
    let (mut train_idx, val_idx) =
        stratified_split(&labels, config.validation_fraction, config.seed);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::InvalidConfig(
            "dataset too small for a train/validation split".into(),
        ));
    }
    let val: Vec<Example<'_>> = val_idx.iter().map(|&i| examples[i]).collect();

    let init = ProjectionModel::glorot(store.dim(), config.out_dim, distance, config.seed)?;
    fit_from(init, &examples, &mut train_idx, &val, config)
}

fn fit_from(
    mut model: ProjectionModel,
    examples: &[Example<'_>],
    train_idx: &mut [usize],
    val: &[Example<'_>],
    config: &TrainConfig,
) -> Result<(ProjectionModel, TrainHistory)> {
    // Offset so the shuffle stream differs from the split stream.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut adam = Adam::for_model(config.adam(), &model);
    let mut history = TrainHistory::default();
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut wait = 0usize;
    let mut batch: Vec<Example<'_>> = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in train_idx.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| examples[i]));
            let (loss, grads) = model.loss_and_grad(&batch)?;
            epoch_loss += loss * chunk.len() as f64;
            adam.step_model(&mut model, grads)?;
        }
        let (val_loss, val_acc) = evaluate(&model, val)?;
        history.train_loss.push(epoch_loss / train_idx.len() as f64);
        history.val_loss.push(val_loss);
        history.val_accuracy.push(val_acc);

        if val_loss < best_loss {
            best_loss = val_loss;
            best = model.clone();
            history.best_epoch = epoch;
            wait = 0;
        } else {
            wait += 1;
            if wait >= config.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, history))
}
