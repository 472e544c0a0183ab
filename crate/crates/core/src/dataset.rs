//! Labelled pairs, synthetic wrong-match sampling and SICK relatedness conversion.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::open;

/// Pair label: `0` for a right match, `1` for a wrong match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Right,
    Wrong,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Right => 0.0,
            Label::Wrong => 1.0,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::Right),
            1 => Ok(Label::Wrong),
            other => Err(Error::InvalidLabel(other)),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        match l {
            Label::Right => 0,
            Label::Wrong => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairExample {
    pub driver_id: String,
    pub target_id: String,
    pub label: Label,
}

impl PairExample {
    pub fn new(driver_id: impl Into<String>, target_id: impl Into<String>, label: Label) -> Self {
        Self {
            driver_id: driver_id.into(),
            target_id: target_id.into(),
            label,
        }
    }
}

/// Share of sampled wrong matches drawn from unmatched targets, when any exist.
pub const UNMATCHED_SHARE: f64 = 0.5;

/// Samples `n` distinct wrong driver-target pairs that do not occur among `positives`.
///
/// At least [`UNMATCHED_SHARE`] of the output pairs an arbitrary driver with
/// one of `unmatched_targets` whenever enough such combinations exist; the
/// remainder come from the matched targets. Output order is a deterministic
/// function of the inputs and `seed`.
pub fn generate_negatives(
    positives: &[PairExample],
    drivers: &BTreeSet<String>,
    targets: &BTreeSet<String>,
    unmatched_targets: &BTreeSet<String>,
    n: usize,
    seed: u64,
) -> Result<Vec<PairExample>> {
    if !unmatched_targets.is_subset(targets) {
        return Err(Error::InvalidConfig(
            "unmatched targets must be a subset of targets".into(),
        ));
    }
    let known: HashSet<(&str, &str)> = positives
        .iter()
        .map(|p| (p.driver_id.as_str(), p.target_id.as_str()))
        .collect();
    let drivers: Vec<&str> = drivers.iter().map(String::as_str).collect();
    let unmatched: Vec<&str> = unmatched_targets.iter().map(String::as_str).collect();
    let matched: Vec<&str> = targets
        .difference(unmatched_targets)
        .map(String::as_str)
        .collect();

    let unmatched_pool = Pool::new(&drivers, &unmatched, &known);
    let matched_pool = Pool::new(&drivers, &matched, &known);
    let available = unmatched_pool.available + matched_pool.available;
    if n > available {
        return Err(Error::InsufficientPairs {
            requested: n,
            available,
        });
    }

    let quota = ((n as f64) * UNMATCHED_SHARE).ceil() as usize;
    let from_unmatched = quota
        .min(unmatched_pool.available)
        .max(n.saturating_sub(matched_pool.available));
    let from_matched = n - from_unmatched;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = unmatched_pool.sample(from_unmatched, &mut rng);
    out.extend(matched_pool.sample(from_matched, &mut rng));
    out.shuffle(&mut rng);
    Ok(out
        .into_iter()
        .map(|(d, t)| PairExample::new(d, t, Label::Wrong))
        .collect())
}

struct Pool<'a> {
    drivers: &'a [&'a str],
    targets: &'a [&'a str],
    known: &'a HashSet<(&'a str, &'a str)>,
    available: usize,
}

impl<'a> Pool<'a> {
    fn new(
        drivers: &'a [&'a str],
        targets: &'a [&'a str],
        known: &'a HashSet<(&'a str, &'a str)>,
    ) -> Self {
        let target_set: HashSet<&str> = targets.iter().copied().collect();
        let driver_set: HashSet<&str> = drivers.iter().copied().collect();
        let blocked = known
            .iter()
            .filter(|(d, t)| driver_set.contains(d) && target_set.contains(t))
            .count();
        Self {
            drivers,
            targets,
            known,
            available: drivers.len() * targets.len() - blocked,
        }
    }

    fn sample<R: Rng>(&self, k: usize, rng: &mut R) -> Vec<(&'a str, &'a str)> {
        if k == 0 {
            return Vec::new();
        }
        let total = self.drivers.len() * self.targets.len();
        let at = |i: usize| {
            (
                self.drivers[i / self.targets.len()],
                self.targets[i % self.targets.len()],
            )
        };
        if 2 * k >= self.available {
            // dense request: enumerate and draw without replacement
            let candidates: Vec<_> = (0..total)
                .map(at)
                .filter(|pair| !self.known.contains(pair))
                .collect();
            return candidates.choose_multiple(rng, k).copied().collect();
        }
        let mut picked = HashSet::with_capacity(k);
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let pair = at(rng.gen_range(0..total));
            if !self.known.contains(&pair) && picked.insert(pair) {
                out.push(pair);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SickLabel {
    Label(Label),
    Filtered,
}

/// Converts a SICK relatedness score to a binary label.
///
/// Scores above 3 are right matches; scores up to and including 3 are wrong
/// matches. With `drop_midrange`, scores in `(2, 3]` are filtered out.
pub fn sick_convert(relatedness: f64, drop_midrange: bool) -> Result<SickLabel> {
    if !(0.0..=5.0).contains(&relatedness) {
        return Err(Error::OutOfRange(relatedness));
    }
    Ok(if relatedness > 3.0 {
        SickLabel::Label(Label::Right)
    } else if drop_midrange && relatedness > 2.0 {
        SickLabel::Filtered
    } else {
        SickLabel::Label(Label::Wrong)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SickRow {
    pub pair_id: String,
    pub sentence_a: String,
    pub sentence_b: String,
    pub relatedness: f64,
}

/// Reads the SICK tab-separated distribution file. Entailment columns are ignored.
pub fn read_sick(path: &Path) -> Result<Vec<SickRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .from_reader(open(path)?);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MalformedRecord {
                line: 1,
                reason: format!("missing column {name}"),
            })
    };
    let id_col = col("pair_ID")?;
    let a_col = col("sentence_A")?;
    let b_col = col("sentence_B")?;
    let score_col = col("relatedness_score")?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let field = |c: usize| {
            record.get(c).ok_or_else(|| Error::MalformedRecord {
                line: i + 2,
                reason: format!("missing field {c}"),
            })
        };
        let relatedness =
            field(score_col)?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::MalformedRecord {
                    line: i + 2,
                    reason: e.to_string(),
                })?;
        rows.push(SickRow {
            pair_id: field(id_col)?.trim().to_owned(),
            sentence_a: field(a_col)?.to_owned(),
            sentence_b: field(b_col)?.to_owned(),
            relatedness,
        });
    }
    Ok(rows)
}
