//! Multi-head attention with per-head energy sources.
//!
//! Learned heads compute `softmax(Q K^T / sqrt(d_k))`; fixed heads take a
//! constant pattern matrix from the batch's [`PatternBank`] and skip the
//! query/key path entirely. All heads own a value projection and share the
//! output projection.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::patterns::{PatternBank, PatternKind, PatternVariant};
use crate::tensor::{Graph, ParamStore, Tensor, Var};

use super::{HeadSpec, ModelError};

/// Parameter slots of one attention block inside a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub specs: Vec<HeadSpec>,
    pub head_dim: usize,
    /// Query projection `[d_model, learned * head_dim]` and bias; absent
    /// when every head is fixed.
    pub q: Option<(usize, usize)>,
    pub k: Option<(usize, usize)>,
    /// Value projection `[d_model, heads * head_dim]` and bias.
    pub v: (usize, usize),
    /// Output projection `[heads * head_dim, d_model]` and bias.
    pub o: (usize, usize),
}

fn linear<R: Rng>(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> (usize, usize) {
    let w = store.insert(format!("{name}.w"), Tensor::xavier_uniform(&[fan_in, fan_out], rng));
    let b = store.insert(format!("{name}.b"), Tensor::zeros(&[fan_out]));
    (w, b)
}

impl AttentionParams {
    pub fn register<R: Rng>(store: &mut ParamStore, prefix: &str, d_model: usize, specs: &[HeadSpec], rng: &mut R) -> Self {
        let heads = specs.len();
        let head_dim = d_model / heads;
        let learned = specs.iter().filter(|s| s.is_learned()).count();
        let (q, k) = if learned > 0 {
            (
                Some(linear(store, &format!("{prefix}.q"), d_model, learned * head_dim, rng)),
                Some(linear(store, &format!("{prefix}.k"), d_model, learned * head_dim, rng)),
            )
        } else {
            (None, None)
        };
        let v = linear(store, &format!("{prefix}.v"), d_model, heads * head_dim, rng);
        let o = linear(store, &format!("{prefix}.o"), heads * head_dim, d_model, rng);
        Self {
            specs: specs.to_vec(),
            head_dim,
            q,
            k,
            v,
            o,
        }
    }

    pub fn vars(&self, params: &[Var]) -> AttentionVars {
        let pair = |(w, b): (usize, usize)| (params[w], params[b]);
        AttentionVars {
            q: self.q.map(pair),
            k: self.k.map(pair),
            v: pair(self.v),
            o: pair(self.o),
        }
    }
}

/// Graph handles of an attention block's weights and biases.
#[derive(Debug, Clone, Copy)]
pub struct AttentionVars {
    pub q: Option<(Var, Var)>,
    pub k: Option<(Var, Var)>,
    pub v: (Var, Var),
    pub o: (Var, Var),
}

/// Sequence geometry of an attention call: `batch` sentences with `tq`
/// query rows and `tk` key rows each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttnShape {
    pub batch: usize,
    pub tq: usize,
    pub tk: usize,
}

/// Constant `[batch, n, n]` energy nodes for each fixed head kind.
#[derive(Debug, Clone, Default)]
pub struct FixedEnergies {
    nodes: HashMap<(PatternKind, PatternVariant), Var>,
}

impl FixedEnergies {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Insert every pattern of `bank` into the graph once; the nodes are
    /// then shared across layers.
    pub fn from_bank(g: &mut Graph, bank: &PatternBank, specs: &[HeadSpec], batch: usize) -> Result<Self, ModelError> {
        let n = bank.max_len();
        let mut nodes = HashMap::new();
        for spec in specs.iter().filter(|s| !s.is_learned()) {
            let key = (spec.kind, spec.variant());
            if nodes.contains_key(&key) {
                continue;
            }
            let data = bank
                .stacked(spec.kind, spec.variant())
                .ok_or_else(|| ModelError::Config(format!("pattern bank has no {:?} {:?} entry", spec.kind, spec.variant())))?;
            nodes.insert(key, g.constant(Tensor::new(vec![batch, n, n], data)?));
        }
        Ok(Self { nodes })
    }

    pub fn get(&self, spec: &HeadSpec) -> Option<Var> {
        self.nodes.get(&(spec.kind, spec.variant())).copied()
    }
}

/// Seeded inverted dropout. Disabled when `rng` is `None` or `p == 0`.
#[derive(Debug, Clone)]
pub struct Dropout {
    p: f64,
    rng: Option<ChaCha8Rng>,
}

impl Dropout {
    pub fn disabled() -> Self {
        Self { p: 0.0, rng: None }
    }

    pub fn new(p: f64, seed: u64) -> Self {
        Self {
            p,
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn is_active(&self) -> bool {
        self.p > 0.0 && self.rng.is_some()
    }

    pub fn apply(&mut self, g: &mut Graph, x: Var) -> Result<Var, ModelError> {
        let p = self.p;
        let Some(rng) = self.rng.as_mut().filter(|_| p > 0.0) else {
            return Ok(x);
        };
        let keep = 1.0 / (1.0 - p);
        let mask = (0..g.value(x).numel())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        Ok(g.mul_const(x, mask)?)
    }
}

/// Multi-head attention of `query` rows over `memory` rows, both laid out
/// as `[batch * t, d_model]`.
///
/// `mask` is an additive `[batch, tq, tk]` constant (0 or `-inf`) applied to
/// learned heads before the softmax. Heads with `disabled[h]` contribute
/// zeros to the concatenation.
#[allow(clippy::too_many_arguments)]
pub fn multi_head_attention(
    g: &mut Graph,
    query: Var,
    memory: Var,
    shape: AttnShape,
    specs: &[HeadSpec],
    vars: &AttentionVars,
    energies: &FixedEnergies,
    mask: Option<Var>,
    disabled: &[bool],
    dropout: &mut Dropout,
) -> Result<Var, ModelError> {
    let AttnShape { batch, tq, tk } = shape;
    let heads = specs.len();
    let d_model = g.value(query).last_dim();
    let head_dim = d_model / heads;
    let has_learned = specs.iter().any(HeadSpec::is_learned);

    let (q, k) = if has_learned {
        let (qw, qb) = vars.q.ok_or_else(|| ModelError::Config("learned head without query projection".into()))?;
        let (kw, kb) = vars.k.ok_or_else(|| ModelError::Config("learned head without key projection".into()))?;
        let q = g.matmul(query, qw)?;
        let q = g.add_bias(q, qb)?;
        let k = g.matmul(memory, kw)?;
        let k = g.add_bias(k, kb)?;
        (Some(q), Some(k))
    } else {
        (None, None)
    };
    let v = g.matmul(memory, vars.v.0)?;
    let v = g.add_bias(v, vars.v.1)?;

    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut outputs = Vec::with_capacity(heads);
    let mut learned_slot = 0;
    for (h, spec) in specs.iter().enumerate() {
        let slot = learned_slot;
        if spec.is_learned() {
            learned_slot += 1;
        }
        if disabled.get(h).copied().unwrap_or(false) {
            outputs.push(g.constant(Tensor::zeros(&[batch * tq, head_dim])));
            continue;
        }
        let energy = if spec.is_learned() {
            let (q, k) = (q.expect("checked above"), k.expect("checked above"));
            let qh = g.slice_last_dim(q, slot * head_dim, head_dim)?;
            let qh = g.reshape(qh, &[batch, tq, head_dim])?;
            let kh = g.slice_last_dim(k, slot * head_dim, head_dim)?;
            let kh = g.reshape(kh, &[batch, tk, head_dim])?;
            let kt = g.transpose(kh)?;
            let scores = g.matmul(qh, kt)?;
            let scores = g.scale(scores, scale)?;
            let scores = match mask {
                Some(m) => g.add(scores, m)?,
                None => scores,
            };
            let probs = g.row_softmax(scores)?;
            dropout.apply(g, probs)?
        } else {
            if tq != tk {
                return Err(ModelError::Config(format!(
                    "fixed head {:?} used outside self-attention",
                    spec.kind
                )));
            }
            let e = energies
                .get(spec)
                .ok_or_else(|| ModelError::Config(format!("no pattern bank entry for fixed head {h} ({:?})", spec.kind)))?;
            if g.shape(e) != [batch, tq, tk] {
                return Err(ModelError::Config(format!(
                    "pattern bank shape {:?} does not match attention shape {:?}",
                    g.shape(e),
                    [batch, tq, tk]
                )));
            }
            e
        };
        let vh = g.slice_last_dim(v, h * head_dim, head_dim)?;
        let vh = g.reshape(vh, &[batch, tk, head_dim])?;
        let out = g.matmul(energy, vh)?;
        outputs.push(g.reshape(out, &[batch * tq, head_dim])?);
    }
    let concat = g.concat_last_dim(&outputs)?;
    let out = g.matmul(concat, vars.o.0)?;
    Ok(g.add_bias(out, vars.o.1)?)
}

/// Additive mask hiding padded keys: `[batch, tq, tk]`.
pub fn padding_mask(lengths: &[usize], tq: usize, tk: usize) -> Tensor {
    let mut data = vec![0.0; lengths.len() * tq * tk];
    for (b, &len) in lengths.iter().enumerate() {
        for i in 0..tq {
            let row = &mut data[(b * tq + i) * tk..(b * tq + i + 1) * tk];
            row[len.min(tk)..].iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
        }
    }
    Tensor::new(vec![lengths.len(), tq, tk], data).expect("mask shape")
}

/// Additive causal mask: position `i` sees keys `0..=i`.
pub fn causal_mask(batch: usize, t: usize) -> Tensor {
    let mut data = vec![0.0; batch * t * t];
    for b in 0..batch {
        for i in 0..t {
            for j in i + 1..t {
                data[(b * t + i) * t + j] = f64::NEG_INFINITY;
            }
        }
    }
    Tensor::new(vec![batch, t, t], data).expect("mask shape")
}
