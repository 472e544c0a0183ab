//! Siamese projection head over fixed sentence embeddings, with distance
//! calibration and per-prediction accuracy scores.
//!
//! The pipeline: embed texts (or load precomputed embeddings), [`train::fit`]
//! a tied-weight dense layer so right matches land close together, then
//! [`calibration::calibrate`] the predicted distances into a threshold and
//! [`scoring`] tables that turn any new distance into a 0-100 score.

pub mod calibration;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod io;
pub mod model;
pub mod optim;
pub mod report;
pub mod scoring;
pub mod synth;
pub mod text;
pub mod train;
pub mod vector;

pub use calibration::{
    calibrate, find_threshold, CalibrationConfig, CalibrationResult, ClassSamples, DistributionPair,
};
pub use dataset::{Label, PairExample};
pub use error::{Error, Result};
pub use io::{EmbeddingRecord, EmbeddingStore};
pub use model::{ModelFile, ProjectionModel};
pub use scoring::{score_prediction, AccuracyTable, ScoredPrediction, Side};
pub use train::{fit, TrainConfig, TrainHistory};
pub use vector::{distance, DistanceKind, SquashKind, Vector};
