//! Transformer encoder-decoder translation with fixed positional encoder
//! attention heads.

pub mod data;
pub mod eval;
pub mod model;
pub mod patterns;
pub mod system;
pub mod tensor;
pub mod train;
