//! Adam training loop over token-capped batches.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{batch_iter, Batch, BatchConfig, EncodedPair};
use crate::model::{Model, ModelError};
use crate::tensor::{adam_step, AdamConfig, AdamState, TensorError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("numerical failure at step {step}: {message}")]
    Numerical { step: usize, message: String },
    #[error("invalid training setup: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub adam: AdamConfig,
    /// Source-token cap per batch.
    pub batch_tokens: usize,
    pub log_every: usize,
    /// Seeds batch shuffling and dropout.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            adam: AdamConfig::default(),
            batch_tokens: 1000,
            log_every: 100,
            seed: 1,
        }
    }
}

/// One line of the training log: means over the steps since the last line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRow {
    pub step: usize,
    pub loss: f64,
    pub token_accuracy: f64,
    pub seconds: f64,
}

pub const LOG_HEADER: &str = "step,loss,token_accuracy,seconds";

impl LogRow {
    pub fn csv(&self) -> String {
        format!("{},{:.6},{:.6},{:.3}", self.step, self.loss, self.token_accuracy, self.seconds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub steps: usize,
    pub epochs: usize,
    pub final_loss: f64,
    pub final_token_accuracy: f64,
    pub log: Vec<LogRow>,
}

/// Train `model` in place for `cfg.steps` updates, cycling through `data`
/// with a fresh shuffle per epoch. `on_log` sees every log row as it is
/// produced.
pub fn train<F: FnMut(&LogRow)>(model: &mut Model, data: &[EncodedPair], cfg: &TrainConfig, mut on_log: F) -> Result<TrainSummary, TrainError> {
    if cfg.batch_tokens == 0 {
        return Err(TrainError::Config("batch_tokens must be positive".into()));
    }
    let log_every = cfg.log_every.max(1);
    let attach_segs = model.config().uses_word_patterns();
    let max_len = model.config().max_len;
    let mut state = AdamState::new();
    let start = Instant::now();
    let mut log = Vec::new();
    let (mut win_loss, mut win_correct, mut win_tokens, mut win_steps) = (0.0, 0usize, 0usize, 0usize);
    let mut step = 0;
    let mut epoch = 0;
    while step < cfg.steps {
        let batches: Vec<Batch> = batch_iter(
            data,
            &BatchConfig {
                max_tokens: cfg.batch_tokens,
                max_len,
                shuffle_seed: Some(cfg.seed.wrapping_add(epoch as u64)),
                attach_segs,
            },
        )
        .collect();
        if batches.is_empty() {
            return Err(TrainError::Config("no usable training sentences".into()));
        }
        epoch += 1;
        for batch in &batches {
            if step == cfg.steps {
                break;
            }
            step += 1;
            let dropout_seed = cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(step as u64);
            let out = model.loss_and_grads(batch, Some(dropout_seed))?;
            if !out.loss.is_finite() {
                return Err(TrainError::Numerical {
                    step,
                    message: format!("loss is {}", out.loss),
                });
            }
            adam_step(model.params_mut(), &out.grads, &mut state, &cfg.adam).map_err(|e| match e {
                TensorError::Numerical(message) => TrainError::Numerical { step, message },
                other => TrainError::Model(other.into()),
            })?;
            win_loss += out.loss;
            win_correct += out.correct;
            win_tokens += out.tokens;
            win_steps += 1;
            if step % log_every == 0 || step == cfg.steps {
                let row = LogRow {
                    step,
                    loss: win_loss / win_steps as f64,
                    token_accuracy: win_correct as f64 / win_tokens.max(1) as f64,
                    seconds: start.elapsed().as_secs_f64(),
                };
                log::info!("step {} loss {:.4} acc {:.4}", row.step, row.loss, row.token_accuracy);
                on_log(&row);
                log.push(row);
                (win_loss, win_correct, win_tokens, win_steps) = (0.0, 0, 0, 0);
            }
        }
    }
    let last = log.last().copied();
    Ok(TrainSummary {
        steps: step,
        epochs: epoch,
        final_loss: last.map_or(f64::NAN, |r| r.loss),
        final_token_accuracy: last.map_or(0.0, |r| r.token_accuracy),
        log,
    })
}

/// Teacher-forced token accuracy of `model` over `data`, without dropout.
pub fn token_accuracy(model: &Model, data: &[EncodedPair], batch_tokens: usize) -> Result<f64, TrainError> {
    let cfg = BatchConfig {
        max_tokens: batch_tokens,
        max_len: model.config().max_len,
        shuffle_seed: None,
        attach_segs: model.config().uses_word_patterns(),
    };
    let (mut correct, mut tokens) = (0, 0);
    for batch in batch_iter(data, &cfg) {
        let (c, t) = model.teacher_forced_accuracy(&batch)?;
        correct += c;
        tokens += t;
    }
    Ok(correct as f64 / tokens.max(1) as f64)
}
