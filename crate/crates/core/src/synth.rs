//! Seeded synthetic driver/target corpus for smoke runs and tests.
//!
//! Each matched entity owns a private vocabulary. Its driver text has
//! [`DRIVER_TOKENS`] tokens; the target keeps [`SHARED_TOKENS`] of them and
//! adds fresh ones, so right matches share 70% of their tokens while any two
//! different entities share none. A quarter as many unmatched targets are
//! added and wrong matches are sampled with [`generate_negatives`].

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{generate_negatives, Label, PairExample};
use crate::error::Result;

pub const DRIVER_TOKENS: usize = 10;
pub const SHARED_TOKENS: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyCorpus {
    /// `(id, text)` for every driver and target.
    pub texts: Vec<(String, String)>,
    pub pairs: Vec<PairExample>,
}

struct Words<'r> {
    rng: &'r mut ChaCha8Rng,
    used: HashSet<String>,
}

impl Words<'_> {
    fn fresh(&mut self) -> String {
        const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
        loop {
            let word: String = if self.rng.gen_bool(0.2) {
                // account-number style token
                format!(
                    "{}{:06}",
                    LETTERS[self.rng.gen_range(0..26)] as char,
                    self.rng.gen_range(0..1_000_000)
                )
            } else {
                let len = self.rng.gen_range(4..=9);
                (0..len)
                    .map(|_| LETTERS[self.rng.gen_range(0..26)] as char)
                    .collect()
            };
            if self.used.insert(word.clone()) {
                return word;
            }
        }
    }

    fn take(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.fresh()).collect()
    }
}

/// Builds a corpus of `n_pairs` pairs, half right matches.
pub fn toy_corpus(n_pairs: usize, seed: u64) -> Result<ToyCorpus> {
    let n_right = n_pairs / 2;
    let n_wrong = n_pairs - n_right;
    let n_unmatched = (n_right / 4).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut texts = Vec::new();
    let mut positives = Vec::new();
    let mut drivers = BTreeSet::new();
    let mut targets = BTreeSet::new();
    let mut unmatched = BTreeSet::new();

    {
        let mut words = Words {
            rng: &mut rng,
            used: HashSet::new(),
        };
        for i in 0..n_right {
            let driver = words.take(DRIVER_TOKENS);
            let mut target: Vec<String> = driver[..SHARED_TOKENS].to_vec();
            target.extend(words.take(DRIVER_TOKENS - SHARED_TOKENS));
            target.shuffle(words.rng);
            let (d, t) = (format!("d{i:05}"), format!("t{i:05}"));
            texts.push((d.clone(), driver.join(" ")));
            texts.push((t.clone(), target.join(" ")));
            positives.push(PairExample::new(d.clone(), t.clone(), Label::Right));
            drivers.insert(d);
            targets.insert(t);
        }
        for i in 0..n_unmatched {
            let t = format!("u{i:05}");
            texts.push((t.clone(), words.take(DRIVER_TOKENS).join(" ")));
            targets.insert(t.clone());
            unmatched.insert(t);
        }
    }

    let negatives = generate_negatives(
        &positives,
        &drivers,
        &targets,
        &unmatched,
        n_wrong,
        rng.gen(),
    )?;
    let mut pairs = positives;
    pairs.extend(negatives);
    pairs.shuffle(&mut rng);
    Ok(ToyCorpus { texts, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn corpus_shape_and_token_sharing() {
        let corpus = toy_corpus(200, 5).unwrap();
        assert_eq!(corpus.pairs.len(), 200);
        let text: HashMap<_, _> = corpus.texts.iter().cloned().collect();
        let tokens =
            |id: &str| -> HashSet<String> { text[id].split(' ').map(str::to_owned).collect() };
        let mut right = 0;
        for p in &corpus.pairs {
            let (a, b) = (tokens(&p.driver_id), tokens(&p.target_id));
            let shared = a.intersection(&b).count();
            match p.label {
                Label::Right => {
                    right += 1;
                    assert!(shared * 10 >= 6 * a.len());
                }
                Label::Wrong => assert_eq!(shared, 0),
            }
        }
        assert_eq!(right, 100);
    }

    #[test]
    fn deterministic() {
        assert_eq!(toy_corpus(50, 1).unwrap(), toy_corpus(50, 1).unwrap());
        assert_ne!(toy_corpus(50, 1).unwrap(), toy_corpus(50, 2).unwrap());
    }
}
