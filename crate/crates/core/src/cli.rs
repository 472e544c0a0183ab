//! Command-line front end: option merging and the pipeline commands.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::calibration::{calibrate, CalibrationConfig, CalibrationResult, DEFAULT_BINS};
use crate::dataset::{read_sick, sick_convert, Label, PairExample, SickLabel};
use crate::error::{Error, Result};
use crate::io::{
    read_pairs, read_texts, write_embeddings, write_pairs, write_texts, EmbeddingRecord,
    EmbeddingStore,
};
use crate::model::{ModelFile, ProjectionModel, DEFAULT_IN_DIM};
use crate::report::{read_density_csv, render_svg};
use crate::scoring::{build_tables, score_prediction, AccuracyTable};
use crate::synth::toy_corpus;
use crate::text::{toy_embed_with, CleaningConfig};
use crate::train::{fit, TrainConfig};
use crate::vector::DistanceKind;

pub const CALIBRATION_FILE: &str = "calibration.json";
pub const DENSITY_FILE: &str = "densities.csv";
pub const RIGHT_TABLE_FILE: &str = "right_table.json";
pub const WRONG_TABLE_FILE: &str = "wrong_table.json";
pub const SCORES_FILE: &str = "scores.csv";
pub const REPORT_FILE: &str = "report.svg";
pub const PAIRS_FILE: &str = "pairs.csv";
pub const TEXTS_FILE: &str = "texts.tsv";

#[derive(Debug, Parser)]
#[command(
    name = "siamcal",
    version,
    about = "Siamese distance calibration toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed an `id<TAB>text` file with the feature-hashing toy embedder.
    EmbedToy(Options),
    /// Convert the SICK tab-separated file to pairs.csv + texts.tsv.
    SickPrep(Options),
    /// Write a synthetic driver/target corpus (texts.tsv + pairs.csv).
    ToyCorpus(Options),
    /// Train the projection head and save the model with its history.
    Train(Options),
    /// Compute the threshold, mislabel rates, densities and accuracy tables.
    Calibrate(Options),
    /// Score pairs with a calibrated model.
    Score(Options),
    /// Render the density CSV and threshold as an SVG.
    Report(Options),
}

/// Flags shared by every command. A JSON config file with the same keys
/// (snake_case) supplies defaults; flags take precedence.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// JSON config file.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory holding calibration.json, densities.csv and the accuracy tables.
    #[arg(long)]
    pub tables: Option<PathBuf>,
    /// Input file for embed-toy (id<TAB>text) and sick-prep (SICK TSV).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_parser = ["manhattan", "euclidean", "minkowski"])]
    pub distance: Option<String>,
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub drop_midrange: bool,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// Width of the dense projection layer.
    #[arg(long)]
    pub out_dim: Option<usize>,
    /// Toy embedding dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Comma-separated boilerplate tokens removed during cleaning.
    #[arg(long, value_delimiter = ',')]
    pub boilerplate: Option<Vec<String>>,
    /// L2-normalise embeddings on load.
    #[arg(long)]
    pub normalize: bool,
    /// Disable density smoothing.
    #[arg(long)]
    pub no_smooth: bool,
    /// Number of pairs for toy-corpus.
    #[arg(long)]
    pub n_pairs: Option<usize>,
}

impl Options {
    /// Fills unset values from `base`; flags already set here win.
    fn or(self, base: Options) -> Options {
        Options {
            config: self.config,
            embeddings: self.embeddings.or(base.embeddings),
            pairs: self.pairs.or(base.pairs),
            model: self.model.or(base.model),
            out: self.out.or(base.out),
            tables: self.tables.or(base.tables),
            input: self.input.or(base.input),
            distance: self.distance.or(base.distance),
            p: self.p.or(base.p),
            bins: self.bins.or(base.bins),
            seed: self.seed.or(base.seed),
            drop_midrange: self.drop_midrange || base.drop_midrange,
            lr: self.lr.or(base.lr),
            clip_norm: self.clip_norm.or(base.clip_norm),
            batch_size: self.batch_size.or(base.batch_size),
            max_epochs: self.max_epochs.or(base.max_epochs),
            patience: self.patience.or(base.patience),
            validation_fraction: self.validation_fraction.or(base.validation_fraction),
            out_dim: self.out_dim.or(base.out_dim),
            dim: self.dim.or(base.dim),
            boilerplate: self.boilerplate.or(base.boilerplate),
            normalize: self.normalize || base.normalize,
            no_smooth: self.no_smooth || base.no_smooth,
            n_pairs: self.n_pairs.or(base.n_pairs),
        }
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub embeddings: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub tables: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub train: TrainConfig,
    pub distance: DistanceKind,
    pub n_bins: usize,
    pub smooth: bool,
    pub cleaning: CleaningConfig,
    pub seed: u64,
    pub drop_midrange: bool,
    pub normalize: bool,
    pub dim: usize,
    pub n_pairs: usize,
}

impl RunConfig {
    pub fn resolve(opts: Options) -> Result<Self> {
        let opts = match &opts.config {
            Some(path) => {
                let file: Options = serde_json::from_reader(crate::io::open(path)?)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
                opts.or(file)
            }
            None => opts,
        };
        let seed = opts.seed.unwrap_or(0);
        let defaults = TrainConfig::default();
        let train = TrainConfig {
            learning_rate: opts.lr.unwrap_or(defaults.learning_rate),
            clip_norm: opts.clip_norm.unwrap_or(defaults.clip_norm),
            batch_size: opts.batch_size.unwrap_or(defaults.batch_size),
            max_epochs: opts.max_epochs.unwrap_or(defaults.max_epochs),
            patience: opts.patience.unwrap_or(defaults.patience),
            validation_fraction: opts
                .validation_fraction
                .unwrap_or(defaults.validation_fraction),
            out_dim: opts.out_dim.unwrap_or(defaults.out_dim),
            seed,
            ..defaults
        };
        train.validate()?;
        let distance = DistanceKind::from_name(
            opts.distance.as_deref().unwrap_or("minkowski"),
            opts.p.unwrap_or(3),
        )?;
        let cleaning = match &opts.boilerplate {
            Some(terms) => {
                CleaningConfig::with_boilerplate(terms.iter().filter(|t| !t.is_empty()))?
            }
            None => CleaningConfig::default(),
        };
        let n_bins = opts.bins.unwrap_or(DEFAULT_BINS);
        if n_bins == 0 {
            return Err(Error::InvalidConfig("--bins must be >= 1".into()));
        }
        Ok(Self {
            embeddings: opts.embeddings,
            pairs: opts.pairs,
            model: opts.model,
            out: opts.out,
            tables: opts.tables,
            input: opts.input,
            train,
            distance,
            n_bins,
            smooth: !opts.no_smooth,
            cleaning,
            seed,
            drop_midrange: opts.drop_midrange,
            normalize: opts.normalize,
            dim: opts.dim.unwrap_or(DEFAULT_IN_DIM),
            n_pairs: opts.n_pairs.unwrap_or(2000),
        })
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig(format!("--{flag} is required")))
}

/// Like [`required`], for paths the command reads.
fn existing<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    let path = required(value, flag)?;
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("--{flag} does not exist"),
            ),
        ))
    }
}

/// Tracks files written by a command and deletes them unless committed.
struct Outputs {
    paths: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn new() -> Self {
        Self {
            paths: Vec::new(),
            committed: false,
        }
    }

    fn add(&mut self, path: PathBuf) -> PathBuf {
        self.paths.push(path.clone());
        path
    }

    fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.paths)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for path in &self.paths {
                let _ = std::fs::remove_file(path);
            }
        }
    }
}

/// Parses arguments and runs the command; returns the files written.
pub fn run_from_args<I, T>(args: I) -> Result<Vec<PathBuf>>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    run(cli.command)
}

pub fn run(command: Command) -> Result<Vec<PathBuf>> {
    let mut outputs = Outputs::new();
    match command {
        Command::EmbedToy(o) => embed_toy(&RunConfig::resolve(o)?, &mut outputs)?,
        Command::SickPrep(o) => sick_prep(&RunConfig::resolve(o)?, &mut outputs)?,
        Command::ToyCorpus(o) => toy(&RunConfig::resolve(o)?, &mut outputs)?,
        Command::Train(o) => train(&RunConfig::resolve(o)?, &mut outputs)?,
        Command::Calibrate(o) => calibrate_cmd(&RunConfig::resolve(o)?, &mut outputs)?,
        Command::Score(o) => score(&RunConfig::resolve(o)?, &mut outputs)?,
        Command::Report(o) => report(&RunConfig::resolve(o)?, &mut outputs)?,
    }
    Ok(outputs.commit())
}

fn embed_toy(cfg: &RunConfig, outputs: &mut Outputs) -> Result<()> {
    let texts = read_texts(existing(&cfg.input, "input")?)?;
    let records = texts
        .into_iter()
        .map(|(id, text)| {
            Ok(EmbeddingRecord {
                vector: toy_embed_with(&text, cfg.dim, cfg.seed, &cfg.cleaning)?,
                id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let path = outputs.add(required(&cfg.embeddings, "embeddings")?.to_path_buf());
    write_embeddings(&records, &path)
}

fn sick_prep(cfg: &RunConfig, outputs: &mut Outputs) -> Result<()> {
    let rows = read_sick(existing(&cfg.input, "input")?)?;
    let out = required(&cfg.out, "out")?;
    let mut pairs = Vec::new();
    let mut texts = Vec::new();
    for row in rows {
        let label = match sick_convert(row.relatedness, cfg.drop_midrange)? {
            SickLabel::Label(l) => l,
            SickLabel::Filtered => continue,
        };
        let (a, b) = (format!("{}_A", row.pair_id), format!("{}_B", row.pair_id));
        texts.push((a.clone(), row.sentence_a));
        texts.push((b.clone(), row.sentence_b));
        pairs.push(PairExample::new(a, b, label));
    }
    write_pairs(&pairs, &outputs.add(out.join(PAIRS_FILE)))?;
    write_texts(&texts, &outputs.add(out.join(TEXTS_FILE)))
}

fn toy(cfg: &RunConfig, outputs: &mut Outputs) -> Result<()> {
    let out = required(&cfg.out, "out")?;
    let corpus = toy_corpus(cfg.n_pairs, cfg.seed)?;
    write_pairs(&corpus.pairs, &outputs.add(out.join(PAIRS_FILE)))?;
    write_texts(&corpus.texts, &outputs.add(out.join(TEXTS_FILE)))
}

fn load_inputs(cfg: &RunConfig) -> Result<(EmbeddingStore, Vec<PairExample>)> {
    let store = EmbeddingStore::load(existing(&cfg.embeddings, "embeddings")?, cfg.normalize)?;
    let pairs = read_pairs(existing(&cfg.pairs, "pairs")?)?;
    Ok((store, pairs))
}

fn train(cfg: &RunConfig, outputs: &mut Outputs) -> Result<()> {
    let (store, pairs) = load_inputs(cfg)?;
    let (model, history) = fit(&pairs, &store, cfg.distance, &cfg.train)?;
    let path = outputs.add(required(&cfg.model, "model")?.to_path_buf());
    model.save(&path, cfg.seed, Some(&history))?;
    println!(
        "epochs={} best_epoch={} val_loss={:.6} val_accuracy={:.4}",
        history.epochs(),
        history.best_epoch + 1,
        history.best_val_loss(),
        history.best_val_accuracy()
    );
    Ok(())
}

fn predictions(cfg: &RunConfig) -> Result<(Vec<f64>, Vec<Label>, ProjectionModel)> {
    let (store, pairs) = load_inputs(cfg)?;
    let model = ModelFile::load(existing(&cfg.model, "model")?)?.into_model()?;
    let mut distances = Vec::with_capacity(pairs.len());
    for p in &pairs {
        distances.push(model.predict(store.get(&p.driver_id)?, store.get(&p.target_id)?)?);
    }
    Ok((distances, pairs.iter().map(|p| p.label).collect(), model))
}

fn calibrate_cmd(cfg: &RunConfig, outputs: &mut Outputs) -> Result<()> {
    let (distances, labels, model) = predictions(cfg)?;
    let out = required(&cfg.out, "out")?;
    let config = CalibrationConfig {
        n_bins: cfg.n_bins,
        smooth: cfg.smooth,
        distance: model.distance_kind(),
    };
    let (dp, result) = calibrate(&distances, &labels, &config)?;
    let (right, wrong) = build_tables(&distances, result.threshold)?;
    dp.write_csv(&outputs.add(out.join(DENSITY_FILE)))?;
    right.save(&outputs.add(out.join(RIGHT_TABLE_FILE)))?;
    wrong.save(&outputs.add(out.join(WRONG_TABLE_FILE)))?;
    result.save(&outputs.add(out.join(CALIBRATION_FILE)))?;
    println!(
        "threshold={:.6} mislabeled_wrong={:.4} mislabeled_right={:.4}",
        result.threshold, result.mislabeled_wrong_fraction, result.mislabeled_right_fraction
    );
    Ok(())
}

fn score(cfg: &RunConfig, outputs: &mut Outputs) -> Result<()> {
    let tables = existing(&cfg.tables, "tables")?;
    let result = CalibrationResult::load(&tables.join(CALIBRATION_FILE))?;
    let right = AccuracyTable::load(&tables.join(RIGHT_TABLE_FILE))?;
    let wrong = AccuracyTable::load(&tables.join(WRONG_TABLE_FILE))?;
    let (distances, _, _) = predictions(cfg)?;
    let scored = distances
        .iter()
        .map(|&d| score_prediction(d, result.threshold, &right, &wrong))
        .collect::<Result<Vec<_>>>()?;
    let path = outputs.add(required(&cfg.out, "out")?.join(SCORES_FILE));
    let mut w = csv::Writer::from_writer(crate::io::create(&path)?);
    w.write_record(["distance", "label", "accuracy_score"])?;
    for s in scored {
        w.write_record([
            s.distance.to_string(),
            u8::from(s.label).to_string(),
            s.accuracy_score.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

fn report(cfg: &RunConfig, outputs: &mut Outputs) -> Result<()> {
    let tables = existing(&cfg.tables, "tables")?;
    let rows = read_density_csv(&tables.join(DENSITY_FILE))?;
    let result = CalibrationResult::load(&tables.join(CALIBRATION_FILE))?;
    let svg = render_svg(&rows, &result)?;
    let path = outputs.add(required(&cfg.out, "out")?.join(REPORT_FILE));
    std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))
}

/// One-line machine-readable error record.
pub fn error_line(err: &Error) -> String {
    serde_json::json!({ "error": err.code(), "message": err.to_string() }).to_string()
}
