//! File formats: JSON Lines embeddings, pair CSV, and `id<TAB>text` files.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Label, PairExample};
use crate::error::{Error, Result};
use crate::vector::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vector,
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map_err(|e| Error::io(path, e))
}

/// Reads an embedding file. The dimension is fixed by the first record.
pub fn read_embeddings(path: &Path) -> Result<Vec<EmbeddingRecord>> {
    let reader = BufReader::new(open(path)?);
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut dim = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EmbeddingRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: i + 1,
                reason: e.to_string(),
            })?;
        let expected = *dim.get_or_insert(record.vector.len());
        if record.vector.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: record.vector.len(),
            });
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_embeddings(records: &[EmbeddingRecord], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    for record in records {
        serde_json::to_writer(&mut w, record)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Id-indexed view over a set of embeddings.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    dim: usize,
    index: HashMap<String, Vector>,
}

impl EmbeddingStore {
    pub fn from_records(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let mut store = Self::default();
        for record in records {
            store.insert(record)?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, record: EmbeddingRecord) -> Result<()> {
        if self.index.is_empty() {
            self.dim = record.vector.len();
        } else if record.vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: record.vector.len(),
            });
        }
        if self.index.contains_key(&record.id) {
            return Err(Error::DuplicateId(record.id));
        }
        self.index.insert(record.id, record.vector);
        Ok(())
    }

    pub fn load(path: &Path, normalize: bool) -> Result<Self> {
        let mut records = read_embeddings(path)?;
        if normalize {
            for r in &mut records {
                r.vector = r.vector.clone().normalized();
            }
        }
        Self::from_records(records)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&Vector> {
        self.index
            .get(id)
            .ok_or_else(|| Error::UnresolvedId(id.to_owned()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRow {
    driver_id: String,
    target_id: String,
    label: u8,
}

pub fn read_pairs(path: &Path) -> Result<Vec<PairExample>> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let mut pairs = Vec::new();
    for (i, row) in reader.deserialize::<PairRow>().enumerate() {
        let row = row.map_err(|e| Error::MalformedRecord {
            line: i + 2,
            reason: e.to_string(),
        })?;
        pairs.push(PairExample {
            driver_id: row.driver_id,
            target_id: row.target_id,
            label: Label::try_from(row.label)?,
        });
    }
    Ok(pairs)
}

pub fn write_pairs(pairs: &[PairExample], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_writer(create(path)?);
    for p in pairs {
        writer.serialize(PairRow {
            driver_id: p.driver_id.clone(),
            target_id: p.target_id.clone(),
            label: p.label.into(),
        })?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Reads `id<TAB>text` lines. Blank lines are skipped.
pub fn read_texts(path: &Path) -> Result<Vec<(String, String)>> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::MalformedRecord {
                line: i + 1,
                reason: "expected id<TAB>text".into(),
            })?;
        if !seen.insert(id.to_owned()) {
            return Err(Error::DuplicateId(id.to_owned()));
        }
        out.push((id.to_owned(), text.to_owned()));
    }
    Ok(out)
}

pub fn write_texts(texts: &[(String, String)], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    for (id, text) in texts {
        let text = text.replace(['\t', '\n', '\r'], " ");
        writeln!(w, "{id}\t{text}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
