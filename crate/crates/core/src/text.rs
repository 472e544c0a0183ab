//! Text cleaning and the feature-hashing toy embedder.

use std::collections::BTreeSet;
use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Vector;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    /// Lowercase tokens dropped after cleaning.
    pub boilerplate_terms: BTreeSet<String>,
    pub lowercase: bool,
    pub strip_punctuation: bool,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            boilerplate_terms: BTreeSet::new(),
            lowercase: true,
            strip_punctuation: true,
        }
    }
}

impl CleaningConfig {
    pub fn with_boilerplate<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut boilerplate_terms = BTreeSet::new();
        for term in terms {
            let term = term.as_ref();
            if term.is_empty() || term.chars().any(char::is_whitespace) {
                return Err(Error::InvalidConfig(format!(
                    "boilerplate term {term:?} must be a single non-empty token"
                )));
            }
            boilerplate_terms.insert(term.to_lowercase());
        }
        Ok(Self {
            boilerplate_terms,
            ..Self::default()
        })
    }
}

pub fn clean_text(text: &str, config: &CleaningConfig) -> String {
    let text = if config.lowercase {
        text.to_lowercase()
    } else {
        text.to_owned()
    };
    let text: String = if config.strip_punctuation {
        text.chars()
            .map(|c| {
                if c.is_alphanumeric() || c.is_whitespace() {
                    c
                } else {
                    ' '
                }
            })
            .collect()
    } else {
        text
    };
    text.split_whitespace()
        .filter(|tok| {
            config.boilerplate_terms.is_empty()
                || !config.boilerplate_terms.contains(&tok.to_lowercase())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn token_hash(token: &str, seed: u64) -> u64 {
    let mut hasher = FnvHasher::with_key(0xcbf2_9ce4_8422_2325 ^ seed);
    hasher.write(token.as_bytes());
    hasher.finish()
}

/// Deterministic bag-of-words embedding by signed feature hashing.
///
/// The text is cleaned with the default [`CleaningConfig`]; callers wanting
/// a different cleaning should clean first. Each token lands in one of `dim`
/// slots with a hashed sign, and the result is L2-normalised unless no token
/// survived.
pub fn toy_embed(text: &str, dim: usize, seed: u64) -> Result<Vector> {
    toy_embed_with(text, dim, seed, &CleaningConfig::default())
}

pub fn toy_embed_with(
    text: &str,
    dim: usize,
    seed: u64,
    config: &CleaningConfig,
) -> Result<Vector> {
    if dim < 2 {
        return Err(Error::InvalidConfig(format!(
            "embedding dimension {dim} < 2"
        )));
    }
    let mut acc = vec![0.0; dim];
    for token in clean_text(text, config)
        .split(' ')
        .filter(|t| !t.is_empty())
    {
        let h = token_hash(token, seed);
        let index = (h % dim as u64) as usize;
        let sign = if (h >> 63) == 1 { -1.0 } else { 1.0 };
        acc[index] += sign;
    }
    Ok(Vector::new(acc)?.normalized())
}
