use std::fs;
use std::ops::Range;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Batch, BOS, EOS, PAD};
use crate::patterns::{pattern_bank, Segmentation};
use crate::tensor::{read_checkpoint, write_checkpoint, Graph, ParamStore, Tensor, Var};

use super::attention::{causal_mask, multi_head_attention, padding_mask, AttentionParams, AttnShape, Dropout, FixedEnergies};
use super::{HeadSpec, ModelConfig, ModelError};

/// Layer norm epsilon used throughout the model.
pub const LN_EPS: f64 = 1e-6;

const CHECKPOINT_FILE: &str = "model.ckpt";
const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, Copy, PartialEq)]
struct Norm {
    g: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct FeedForward {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct EncoderLayer {
    attn: AttentionParams,
    ln1: Norm,
    ffn: FeedForward,
    ln2: Norm,
}

#[derive(Debug, Clone, PartialEq)]
struct DecoderLayer {
    self_attn: AttentionParams,
    ln1: Norm,
    cross: AttentionParams,
    ln2: Norm,
    ffn: FeedForward,
    ln3: Norm,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    src_embed: usize,
    tgt_embed: usize,
    enc: Vec<EncoderLayer>,
    dec: Vec<DecoderLayer>,
    out_w: usize,
    out_b: usize,
}

/// Result of one teacher-forced training pass.
#[derive(Debug, Clone)]
pub struct LossOutput {
    /// Masked mean cross-entropy.
    pub loss: f64,
    pub correct: usize,
    pub tokens: usize,
    /// One gradient per parameter, in [`ParamStore`] order.
    pub grads: Vec<Tensor>,
}

impl LossOutput {
    pub fn token_accuracy(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.correct as f64 / self.tokens as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    layout: Layout,
    /// `head_mask[layer][head]` disables an encoder self-attention head.
    head_mask: Vec<Vec<bool>>,
}

/// Sinusoidal position table `[len, d]`.
pub fn positional_encoding(len: usize, d: usize) -> Tensor {
    let mut data = vec![0.0; len * d];
    for pos in 0..len {
        for i in 0..d {
            let rate = 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 / rate;
            data[pos * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Tensor::new(vec![len, d], data).expect("positional encoding shape")
}

fn norm(store: &mut ParamStore, name: &str, d: usize) -> Norm {
    Norm {
        g: store.insert(format!("{name}.g"), Tensor::full(&[d], 1.0)),
        b: store.insert(format!("{name}.b"), Tensor::zeros(&[d])),
    }
}

fn feed_forward(store: &mut ParamStore, name: &str, d: usize, d_ff: usize, rng: &mut ChaCha8Rng) -> FeedForward {
    FeedForward {
        w1: store.insert(format!("{name}.w1"), Tensor::xavier_uniform(&[d, d_ff], rng)),
        b1: store.insert(format!("{name}.b1"), Tensor::zeros(&[d_ff])),
        w2: store.insert(format!("{name}.w2"), Tensor::xavier_uniform(&[d_ff, d], rng)),
        b2: store.insert(format!("{name}.b2"), Tensor::zeros(&[d])),
    }
}

/// Graph under construction with every parameter inserted as a leaf.
struct Pass<'m> {
    model: &'m Model,
    g: Graph,
    p: Vec<Var>,
    dropout: Dropout,
}

impl<'m> Pass<'m> {
    fn new(model: &'m Model, track_grads: bool, dropout: Dropout) -> Self {
        let mut g = Graph::new();
        let p = model
            .params
            .tensors()
            .iter()
            .map(|t| g.leaf(t.clone(), track_grads))
            .collect();
        Self { model, g, p, dropout }
    }

    fn cfg(&self) -> &ModelConfig {
        &self.model.config
    }

    fn embed(&mut self, table: usize, ids: &[usize], batch: usize, len: usize) -> Result<Var, ModelError> {
        let d = self.cfg().d_model;
        let vocab = self.model.params.get(table).shape()[0];
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(ModelError::InvalidInput(format!("token id {bad} outside vocabulary of {vocab}")));
        }
        let x = self.g.embedding(self.p[table], ids)?;
        let x = self.g.scale(x, (d as f64).sqrt())?;
        let pe = positional_encoding(len, d);
        let mut tiled = Vec::with_capacity(batch * len * d);
        for _ in 0..batch {
            tiled.extend_from_slice(pe.data());
        }
        let pe = self.g.constant(Tensor::new(vec![batch * len, d], tiled)?);
        let x = self.g.add(x, pe)?;
        self.dropout.apply(&mut self.g, x)
    }

    fn residual_norm(&mut self, x: Var, sub: Var, n: Norm) -> Result<Var, ModelError> {
        let sub = self.dropout.apply(&mut self.g, sub)?;
        let y = self.g.add(x, sub)?;
        Ok(self.g.layer_norm(y, self.p[n.g], self.p[n.b], LN_EPS)?)
    }

    fn feed_forward(&mut self, x: Var, f: FeedForward) -> Result<Var, ModelError> {
        let h = self.g.matmul(x, self.p[f.w1])?;
        let h = self.g.add_bias(h, self.p[f.b1])?;
        let h = self.g.relu(h)?;
        let h = self.dropout.apply(&mut self.g, h)?;
        let y = self.g.matmul(h, self.p[f.w2])?;
        Ok(self.g.add_bias(y, self.p[f.b2])?)
    }

    /// Encoder states `[batch * len, d_model]`.
    fn encode(&mut self, src: &[usize], lengths: &[usize], len: usize, segs: Option<&[Segmentation]>) -> Result<Var, ModelError> {
        let model = self.model;
        let cfg = &model.config;
        if len > cfg.max_len {
            return Err(ModelError::Length { len, max: cfg.max_len });
        }
        let batch = lengths.len();
        let specs = &cfg.enc_head_specs;
        let energies = if specs.iter().any(|s| !s.is_learned()) {
            let heads: Vec<_> = specs.iter().map(|s| (s.kind, s.variant())).collect();
            let segs = if cfg.uses_word_patterns() {
                Some(segs.ok_or_else(|| {
                    ModelError::InvalidInput("word-based heads need source segmentations".into())
                })?)
            } else {
                None
            };
            let bank = pattern_bank(&heads, lengths, segs)?;
            if bank.max_len() != len {
                return Err(ModelError::InvalidInput(format!(
                    "padded length {len} does not match longest sentence {}",
                    bank.max_len()
                )));
            }
            FixedEnergies::from_bank(&mut self.g, &bank, specs, batch)?
        } else {
            FixedEnergies::empty()
        };
        let mask = specs
            .iter()
            .any(HeadSpec::is_learned)
            .then(|| self.g.constant(padding_mask(lengths, len, len)));
        let mut x = self.embed(model.layout.src_embed, src, batch, len)?;
        let shape = AttnShape { batch, tq: len, tk: len };
        for (l, layer) in model.layout.enc.iter().enumerate() {
            let vars = layer.attn.vars(&self.p);
            let a = multi_head_attention(
                &mut self.g,
                x,
                x,
                shape,
                specs,
                &vars,
                &energies,
                mask,
                &model.head_mask[l],
                &mut self.dropout,
            )?;
            x = self.residual_norm(x, a, layer.ln1)?;
            let f = self.feed_forward(x, layer.ffn)?;
            x = self.residual_norm(x, f, layer.ln2)?;
        }
        Ok(x)
    }

    /// Decoder logits `[batch * tgt_len, tgt_vocab]` for the given inputs.
    fn decode(&mut self, memory: Var, src_lengths: &[usize], src_len: usize, tgt_in: &[usize], tgt_len: usize) -> Result<Var, ModelError> {
        let model = self.model;
        let cfg = &model.config;
        if tgt_len > cfg.max_len {
            return Err(ModelError::Length {
                len: tgt_len,
                max: cfg.max_len,
            });
        }
        let batch = src_lengths.len();
        let specs = vec![HeadSpec::learned(); cfg.decoder_heads()];
        let none = FixedEnergies::empty();
        let enabled = vec![false; specs.len()];
        let causal = self.g.constant(causal_mask(batch, tgt_len));
        let cross_mask = self.g.constant(padding_mask(src_lengths, tgt_len, src_len));
        let mut y = self.embed(model.layout.tgt_embed, tgt_in, batch, tgt_len)?;
        for layer in &model.layout.dec {
            let vars = layer.self_attn.vars(&self.p);
            let shape = AttnShape {
                batch,
                tq: tgt_len,
                tk: tgt_len,
            };
            let a = multi_head_attention(&mut self.g, y, y, shape, &specs, &vars, &none, Some(causal), &enabled, &mut self.dropout)?;
            y = self.residual_norm(y, a, layer.ln1)?;
            let vars = layer.cross.vars(&self.p);
            let shape = AttnShape {
                batch,
                tq: tgt_len,
                tk: src_len,
            };
            let c = multi_head_attention(&mut self.g, y, memory, shape, &specs, &vars, &none, Some(cross_mask), &enabled, &mut self.dropout)?;
            y = self.residual_norm(y, c, layer.ln2)?;
            let f = self.feed_forward(y, layer.ffn)?;
            y = self.residual_norm(y, f, layer.ln3)?;
        }
        let logits = self.g.matmul(y, self.p[model.layout.out_w])?;
        Ok(self.g.add_bias(logits, self.p[model.layout.out_b])?)
    }
}

fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn count_correct(logits: &[f64], vocab: usize, batch: &Batch) -> (usize, usize) {
    let mut correct = 0;
    let mut tokens = 0;
    for (i, row) in logits.chunks(vocab).enumerate() {
        if batch.loss_mask[i] > 0.0 {
            tokens += 1;
            if argmax(row) == batch.tgt_out[i] {
                correct += 1;
            }
        }
    }
    (correct, tokens)
}

/// Pad variable-length id rows into a `[rows, width]` buffer.
fn pad_rows(rows: &[&[usize]]) -> (Vec<usize>, Vec<usize>, usize) {
    let lengths: Vec<usize> = rows.iter().map(|r| r.len()).collect();
    let width = lengths.iter().copied().max().unwrap_or(0);
    let mut ids = vec![PAD; rows.len() * width];
    for (b, r) in rows.iter().enumerate() {
        ids[b * width..b * width + r.len()].copy_from_slice(r);
    }
    (ids, lengths, width)
}

impl Model {
    /// Fresh model with Xavier-initialised weights drawn from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let d = config.d_model;
        let src_embed = store.insert("src_embed", Tensor::xavier_uniform(&[config.src_vocab, d], &mut rng));
        let tgt_embed = store.insert("tgt_embed", Tensor::xavier_uniform(&[config.tgt_vocab, d], &mut rng));
        let dec_specs = vec![HeadSpec::learned(); config.decoder_heads()];
        let enc = (0..config.enc_layers)
            .map(|l| EncoderLayer {
                attn: AttentionParams::register(&mut store, &format!("enc.{l}.self"), d, &config.enc_head_specs, &mut rng),
                ln1: norm(&mut store, &format!("enc.{l}.ln1"), d),
                ffn: feed_forward(&mut store, &format!("enc.{l}.ffn"), d, config.d_ff, &mut rng),
                ln2: norm(&mut store, &format!("enc.{l}.ln2"), d),
            })
            .collect();
        let dec = (0..config.dec_layers)
            .map(|l| DecoderLayer {
                self_attn: AttentionParams::register(&mut store, &format!("dec.{l}.self"), d, &dec_specs, &mut rng),
                ln1: norm(&mut store, &format!("dec.{l}.ln1"), d),
                cross: AttentionParams::register(&mut store, &format!("dec.{l}.cross"), d, &dec_specs, &mut rng),
                ln2: norm(&mut store, &format!("dec.{l}.ln2"), d),
                ffn: feed_forward(&mut store, &format!("dec.{l}.ffn"), d, config.d_ff, &mut rng),
                ln3: norm(&mut store, &format!("dec.{l}.ln3"), d),
            })
            .collect();
        let out_w = store.insert("out.w", Tensor::xavier_uniform(&[d, config.tgt_vocab], &mut rng));
        let out_b = store.insert("out.b", Tensor::zeros(&[config.tgt_vocab]));
        let head_mask = vec![vec![false; config.n_heads]; config.enc_layers];
        Ok(Self {
            config,
            params: store,
            layout: Layout {
                src_embed,
                tgt_embed,
                enc,
                dec,
                out_w,
                out_b,
            },
            head_mask,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Disable `head` in every encoder layer of `layers`.
    pub fn mask_head(&mut self, layers: Range<usize>, head: usize) -> Result<(), ModelError> {
        self.set_head_mask(layers, head, true)
    }

    pub fn unmask_head(&mut self, layers: Range<usize>, head: usize) -> Result<(), ModelError> {
        self.set_head_mask(layers, head, false)
    }

    fn set_head_mask(&mut self, layers: Range<usize>, head: usize, value: bool) -> Result<(), ModelError> {
        if head >= self.config.n_heads {
            return Err(ModelError::Config(format!(
                "head index {head} out of range for {} heads",
                self.config.n_heads
            )));
        }
        if layers.end > self.config.enc_layers {
            return Err(ModelError::Config(format!(
                "layer range {layers:?} out of range for {} encoder layers",
                self.config.enc_layers
            )));
        }
        for l in layers {
            self.head_mask[l][head] = value;
        }
        Ok(())
    }

    pub fn clear_head_mask(&mut self) {
        self.head_mask.iter_mut().flatten().for_each(|m| *m = false);
    }

    pub fn is_head_masked(&self, layer: usize, head: usize) -> bool {
        self.head_mask[layer][head]
    }

    /// Copy of the model with `head` disabled across all encoder layers.
    pub fn with_head_masked(&self, head: usize) -> Result<Model, ModelError> {
        let mut m = self.clone();
        m.mask_head(0..self.config.enc_layers, head)?;
        Ok(m)
    }

    /// Encoder output `[batch * len, d_model]` for a padded source batch.
    pub fn encode(&self, src: &[usize], lengths: &[usize], segs: Option<&[Segmentation]>) -> Result<Tensor, ModelError> {
        let len = lengths.iter().copied().max().unwrap_or(0);
        if src.len() != lengths.len() * len {
            return Err(ModelError::InvalidInput(format!(
                "{} source ids for {} rows of width {len}",
                src.len(),
                lengths.len()
            )));
        }
        let mut pass = Pass::new(self, false, Dropout::disabled());
        let x = pass.encode(src, lengths, len, segs)?;
        Ok(pass.g.value(x).clone())
    }

    fn dropout(&self, seed: Option<u64>) -> Dropout {
        match seed {
            Some(s) if self.config.dropout > 0.0 => Dropout::new(self.config.dropout, s),
            _ => Dropout::disabled(),
        }
    }

    /// Teacher-forced loss, token accuracy and gradients for one batch.
    /// `dropout_seed = None` runs without dropout.
    pub fn loss_and_grads(&self, batch: &Batch, dropout_seed: Option<u64>) -> Result<LossOutput, ModelError> {
        let mut pass = Pass::new(self, true, self.dropout(dropout_seed));
        let memory = pass.encode(&batch.src_ids, &batch.src_lengths, batch.src_len, batch.segs.as_deref())?;
        let logits = pass.decode(memory, &batch.src_lengths, batch.src_len, &batch.tgt_in, batch.tgt_len)?;
        let loss = pass.g.cross_entropy_with_mask(logits, &batch.tgt_out, &batch.loss_mask)?;
        pass.g.backward(loss)?;

        let (correct, tokens) = count_correct(pass.g.value(logits).data(), self.config.tgt_vocab, batch);
        let grads = pass
            .p
            .iter()
            .zip(self.params.tensors())
            .map(|(&var, t)| match pass.g.grad(var) {
                Some(gr) => Tensor::new(t.shape().to_vec(), gr.to_vec()),
                None => Ok(Tensor::zeros(t.shape())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LossOutput {
            loss: pass.g.value(loss).data()[0],
            correct,
            tokens,
            grads,
        })
    }

    /// Teacher-forced loss without gradients or dropout.
    pub fn loss(&self, batch: &Batch) -> Result<f64, ModelError> {
        let mut pass = Pass::new(self, false, Dropout::disabled());
        let memory = pass.encode(&batch.src_ids, &batch.src_lengths, batch.src_len, batch.segs.as_deref())?;
        let logits = pass.decode(memory, &batch.src_lengths, batch.src_len, &batch.tgt_in, batch.tgt_len)?;
        let loss = pass.g.cross_entropy_with_mask(logits, &batch.tgt_out, &batch.loss_mask)?;
        Ok(pass.g.value(loss).data()[0])
    }

    /// `(correct, tokens)` of argmax predictions under teacher forcing.
    pub fn teacher_forced_accuracy(&self, batch: &Batch) -> Result<(usize, usize), ModelError> {
        let mut pass = Pass::new(self, false, Dropout::disabled());
        let memory = pass.encode(&batch.src_ids, &batch.src_lengths, batch.src_len, batch.segs.as_deref())?;
        let logits = pass.decode(memory, &batch.src_lengths, batch.src_len, &batch.tgt_in, batch.tgt_len)?;
        Ok(count_correct(pass.g.value(logits).data(), self.config.tgt_vocab, batch))
    }

    /// Log-probability of each given target token under teacher forcing.
    /// The decoder reads `<s> t_1 .. t_{m-1}` and position `i` scores
    /// `t_i`; append [`EOS`] to include the end of sentence.
    pub fn score_sequence(&self, src: &[usize], tgt: &[usize], seg: Option<&Segmentation>) -> Result<Vec<f64>, ModelError> {
        let segs = seg.map(|s| vec![s.clone()]);
        Ok(self.score_batch(&[src], &[tgt], segs.as_deref())?.remove(0))
    }

    /// Batched [`Model::score_sequence`].
    pub fn score_batch(&self, src: &[&[usize]], tgt: &[&[usize]], segs: Option<&[Segmentation]>) -> Result<Vec<Vec<f64>>, ModelError> {
        if src.len() != tgt.len() {
            return Err(ModelError::InvalidInput(format!("{} sources for {} targets", src.len(), tgt.len())));
        }
        if let Some(i) = src.iter().position(|s| s.is_empty()) {
            return Err(ModelError::InvalidInput(format!("empty source sentence at index {i}")));
        }
        if let Some(i) = tgt.iter().position(|t| t.is_empty()) {
            return Err(ModelError::InvalidInput(format!("empty target sentence at index {i}")));
        }
        let (src_ids, src_lengths, src_len) = pad_rows(src);
        let dec_rows: Vec<Vec<usize>> = tgt
            .iter()
            .map(|t| std::iter::once(BOS).chain(t[..t.len() - 1].iter().copied()).collect())
            .collect();
        let dec_refs: Vec<&[usize]> = dec_rows.iter().map(Vec::as_slice).collect();
        let (tgt_in, _, tgt_len) = pad_rows(&dec_refs);

        let mut pass = Pass::new(self, false, Dropout::disabled());
        let memory = pass.encode(&src_ids, &src_lengths, src_len, segs)?;
        let logits = pass.decode(memory, &src_lengths, src_len, &tgt_in, tgt_len)?;
        let v = self.config.tgt_vocab;
        let data = pass.g.value(logits).data();
        Ok(tgt
            .iter()
            .enumerate()
            .map(|(b, t)| {
                t.iter()
                    .enumerate()
                    .map(|(i, &tok)| {
                        let row = &data[(b * tgt_len + i) * v..(b * tgt_len + i + 1) * v];
                        log_softmax_row(row)[tok]
                    })
                    .collect()
            })
            .collect())
    }

    /// Greedy decoding of one sentence; the end-of-sentence token is not
    /// included in the output.
    pub fn greedy_decode(&self, src: &[usize], max_steps: usize, seg: Option<&Segmentation>) -> Result<Vec<usize>, ModelError> {
        let segs = seg.map(|s| vec![s.clone()]);
        Ok(self.greedy_decode_batch(&[src], max_steps, segs.as_deref())?.remove(0))
    }

    /// Greedy decoding of a batch. Each step re-runs the decoder over the
    /// whole prefix; sentences stop independently at end-of-sentence.
    pub fn greedy_decode_batch(&self, src: &[&[usize]], max_steps: usize, segs: Option<&[Segmentation]>) -> Result<Vec<Vec<usize>>, ModelError> {
        if src.is_empty() {
            return Ok(Vec::new());
        }
        if let Some(i) = src.iter().position(|s| s.is_empty()) {
            return Err(ModelError::InvalidInput(format!("empty source sentence at index {i}")));
        }
        let max_steps = max_steps.min(self.config.max_len);
        let (src_ids, src_lengths, src_len) = pad_rows(src);
        let memory = {
            let mut pass = Pass::new(self, false, Dropout::disabled());
            let m = pass.encode(&src_ids, &src_lengths, src_len, segs)?;
            pass.g.value(m).clone()
        };
        let batch = src.len();
        let v = self.config.tgt_vocab;
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); batch];
        let mut done = vec![false; batch];
        for step in 0..max_steps {
            let t = step + 1;
            let mut tgt_in = vec![PAD; batch * t];
            for b in 0..batch {
                tgt_in[b * t] = BOS;
                tgt_in[b * t + 1..b * t + 1 + out[b].len()].copy_from_slice(&out[b]);
            }
            let mut pass = Pass::new(self, false, Dropout::disabled());
            let mem = pass.g.constant(memory.clone());
            let logits = pass.decode(mem, &src_lengths, src_len, &tgt_in, t)?;
            let data = pass.g.value(logits).data();
            for b in 0..batch {
                if done[b] {
                    continue;
                }
                let row = &data[(b * t + step) * v..(b * t + step + 1) * v];
                let tok = argmax(row);
                if tok == EOS {
                    done[b] = true;
                } else {
                    out[b].push(tok);
                }
            }
            if done.iter().all(|&d| d) {
                break;
            }
        }
        Ok(out)
    }

    /// Write `model.ckpt` and `config.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ModelError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let ckpt = dir.join(CHECKPOINT_FILE);
        let file = fs::File::create(&ckpt).map_err(io(&ckpt))?;
        write_checkpoint(std::io::BufWriter::new(file), &self.params)?;
        let cfg = dir.join(CONFIG_FILE);
        let json = serde_json::to_string_pretty(&self.config).map_err(|e| ModelError::Json {
            path: cfg.clone(),
            message: e.to_string(),
        })?;
        fs::write(&cfg, json + "\n").map_err(io(&cfg))
    }

    /// Load a model written by [`Model::save`].
    pub fn load(dir: &Path) -> Result<Self, ModelError> {
        let cfg_path = dir.join(CONFIG_FILE);
        let text = fs::read_to_string(&cfg_path).map_err(|source| ModelError::Io {
            path: cfg_path.clone(),
            source,
        })?;
        let config: ModelConfig = serde_json::from_str(&text).map_err(|e| ModelError::Json {
            path: cfg_path.clone(),
            message: e.to_string(),
        })?;
        let mut model = Model::new(config)?;
        let ckpt = dir.join(CHECKPOINT_FILE);
        let file = fs::File::open(&ckpt).map_err(|source| ModelError::Io {
            path: ckpt.clone(),
            source,
        })?;
        let records = read_checkpoint(std::io::BufReader::new(file))?;
        model.params.load_records(records)?;
        Ok(model)
    }
}
