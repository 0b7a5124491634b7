//! Corpora, vocabularies, toy subword splitting, synthetic tasks and
//! token-count batching.

mod batch;
mod corpus;
mod synthetic;
mod vocab;

pub use batch::{batch_iter, Batch, BatchConfig, BatchIter, EncodedPair, SkipCounts};
pub use corpus::{
    join_subwords, load_parallel, read_contrastive, read_lines, split_sentence, toy_subword_split,
    write_contrastive, write_lines, ContrastiveItem, SentencePair,
};
pub use synthetic::{make_synthetic, SyntheticCorpus, Task};
pub use vocab::{Vocabulary, BOS, EOS, PAD, RESERVED, UNK};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("corpus error: {0}")]
    Corpus(String),
    #[error("{path}: line {line} is not valid UTF-8")]
    Encoding { path: PathBuf, line: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
