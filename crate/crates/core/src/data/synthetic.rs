//! Seeded toy translation tasks.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{ContrastiveItem, SentencePair};
use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Copy,
    Reverse,
    LexicalTranslate,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Copy => "copy",
            Task::Reverse => "reverse",
            Task::LexicalTranslate => "lexical-translate",
        })
    }
}

impl FromStr for Task {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "copy" => Ok(Task::Copy),
            "reverse" => Ok(Task::Reverse),
            "lexical-translate" => Ok(Task::LexicalTranslate),
            other => Err(DataError::InvalidArgument(format!(
                "unknown task {other:?}; expected copy, reverse or lexical-translate"
            ))),
        }
    }
}

/// A generated parallel corpus plus one single-token corruption of every
/// target, usable as a contrastive fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub task: Task,
    pub pairs: Vec<SentencePair>,
    pub contrastive: Vec<ContrastiveItem>,
    /// Source symbol index to target symbol index (identity except for
    /// lexical translation).
    pub mapping: Vec<usize>,
}

fn source_token(i: usize) -> String {
    format!("w{i}")
}

impl SyntheticCorpus {
    pub fn target_token(&self, i: usize) -> String {
        match self.task {
            Task::LexicalTranslate => format!("t{i}"),
            _ => source_token(i),
        }
    }

    fn symbol(token: &str) -> Option<usize> {
        token.get(1..).and_then(|s| s.parse().ok())
    }

    /// Map a target sentence back through the inverse bijection.
    pub fn invert_target(&self, target: &[String]) -> Vec<String> {
        let mut inverse = vec![0; self.mapping.len()];
        for (s, &t) in self.mapping.iter().enumerate() {
            inverse[t] = s;
        }
        let mut out: Vec<String> = target
            .iter()
            .map(|tok| Self::symbol(tok).map_or_else(|| tok.clone(), |t| source_token(inverse[t])))
            .collect();
        if self.task == Task::Reverse {
            out.reverse();
        }
        out
    }
}

/// Generate `n_sentences` pairs over `vocab_size` content symbols with
/// lengths drawn uniformly from `len_range`.
pub fn make_synthetic(
    task: Task,
    vocab_size: usize,
    n_sentences: usize,
    len_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<SyntheticCorpus, DataError> {
    if vocab_size < 5 {
        return Err(DataError::InvalidArgument(format!("vocab_size must be at least 5, got {vocab_size}")));
    }
    if len_range.is_empty() || *len_range.start() == 0 {
        return Err(DataError::InvalidArgument(format!("invalid length range {len_range:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mapping: Vec<usize> = (0..vocab_size).collect();
    if task == Task::LexicalTranslate {
        mapping.shuffle(&mut rng);
    }
    let mut corpus = SyntheticCorpus {
        task,
        pairs: Vec::with_capacity(n_sentences),
        contrastive: Vec::with_capacity(n_sentences),
        mapping,
    };
    // corruptions use their own stream so the pairs do not depend on them
    let mut corrupt_rng = ChaCha8Rng::seed_from_u64(seed);
    corrupt_rng.set_stream(1);
    for _ in 0..n_sentences {
        let len = rng.gen_range(len_range.clone());
        let symbols: Vec<usize> = (0..len).map(|_| rng.gen_range(0..vocab_size)).collect();
        let mut tgt_symbols: Vec<usize> = symbols.iter().map(|&s| corpus.mapping[s]).collect();
        if task == Task::Reverse {
            tgt_symbols.reverse();
        }
        let src: Vec<String> = symbols.iter().map(|&s| source_token(s)).collect();
        let tgt: Vec<String> = tgt_symbols.iter().map(|&s| corpus.target_token(s)).collect();

        let pos = corrupt_rng.gen_range(0..tgt_symbols.len());
        let offset = corrupt_rng.gen_range(1..vocab_size);
        let mut bad = tgt.clone();
        bad[pos] = corpus.target_token((tgt_symbols[pos] + offset) % vocab_size);
        corpus.contrastive.push(ContrastiveItem {
            source: src.clone(),
            reference: tgt.clone(),
            contrastive: bad,
            attribute: Some(pos as i64),
        });
        corpus.pairs.push(SentencePair { src, tgt });
    }
    Ok(corpus)
}
