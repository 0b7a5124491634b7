//! Closed-form parameter accounting.

use super::ModelConfig;

/// Parameter totals split by tensor role and by model component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamCount {
    pub total: usize,
    /// Entries of weight matrices and embedding tables.
    pub weights: usize,
    /// Entries of projection bias vectors.
    pub biases: usize,
    /// Layer-norm gains and offsets.
    pub norms: usize,
    /// `(component, count)` in model order; sums to `total`.
    pub components: Vec<(&'static str, usize)>,
}

#[derive(Default)]
struct Tally {
    weights: usize,
    biases: usize,
    norms: usize,
    components: Vec<(&'static str, usize)>,
}

impl Tally {
    fn add(&mut self, name: &'static str, weights: usize, biases: usize, norms: usize) {
        self.weights += weights;
        self.biases += biases;
        self.norms += norms;
        self.components.push((name, weights + biases + norms));
    }
}

/// Exact parameter count of the model described by `cfg`.
///
/// Fixed encoder heads have no query/key projections, so each one removes
/// `2 * d_model * d_k` weights and `2 * d_k` biases per encoder layer.
pub fn param_count(cfg: &ModelConfig) -> ParamCount {
    let d = cfg.d_model;
    let dk = cfg.head_dim();
    let qk = cfg.learned_heads() * dk;
    let enc = cfg.enc_layers;
    let dec = cfg.dec_layers;
    let ffn_w = 2 * d * cfg.d_ff;
    let ffn_b = cfg.d_ff + d;

    let mut t = Tally::default();
    t.add("embeddings", (cfg.src_vocab + cfg.tgt_vocab) * d, 0, 0);
    t.add("encoder.attention.query_key", enc * 2 * d * qk, enc * 2 * qk, 0);
    t.add("encoder.attention.value_output", enc * 2 * d * d, enc * 2 * d, 0);
    t.add("encoder.feed_forward", enc * ffn_w, enc * ffn_b, 0);
    t.add("encoder.layer_norm", 0, 0, enc * 2 * 2 * d);
    t.add("decoder.self_attention", dec * 4 * d * d, dec * 4 * d, 0);
    t.add("decoder.cross_attention", dec * 4 * d * d, dec * 4 * d, 0);
    t.add("decoder.feed_forward", dec * ffn_w, dec * ffn_b, 0);
    t.add("decoder.layer_norm", 0, 0, dec * 3 * 2 * d);
    t.add("output", d * cfg.tgt_vocab, cfg.tgt_vocab, 0);
    ParamCount {
        total: t.weights + t.biases + t.norms,
        weights: t.weights,
        biases: t.biases,
        norms: t.norms,
        components: t.components,
    }
}
