//! Encoder-decoder Transformer whose encoder heads draw their attention
//! energies either from learned queries/keys or from fixed patterns.

mod attention;
mod config;
mod params;
mod transformer;

use std::path::PathBuf;

use thiserror::Error;

use crate::data::DataError;
use crate::patterns::PatternError;
use crate::tensor::TensorError;

pub use attention::{
    causal_mask, multi_head_attention, padding_mask, AttentionParams, AttentionVars, AttnShape, Dropout,
    FixedEnergies,
};
pub use config::{HeadPreset, HeadSpec, ModelConfig};
pub use params::{param_count, ParamCount};
pub use transformer::{positional_encoding, LossOutput, Model, LN_EPS};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sequence of length {len} exceeds max_len {max}")]
    Length { len: usize, max: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
}
