//! BLEU, length-bucketed BLEU, contrastive accuracy and paired bootstrap.

mod bleu;
mod bootstrap;
mod contrastive;

pub use bleu::{
    bucketed_bleu, corpus_bleu, corpus_bleu_with, sentence_stats, tokenize, BleuOptions, BleuReport, BleuStats,
    BucketReport, DEFAULT_BUCKET_EDGES, MAX_ORDER,
};
pub use bootstrap::{paired_bootstrap, BootstrapReport, DEFAULT_RESAMPLES};
pub use contrastive::{contrastive_accuracy, AccuracyCount, ContrastiveReport, ScoredPair};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
