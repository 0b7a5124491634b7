use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::patterns::{PatternKind, PatternVariant};

use super::ModelError;

/// Energy source of one encoder self-attention head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HeadSpec {
    pub kind: PatternKind,
    /// Word-based realisation; ignored for learned heads.
    #[serde(default)]
    pub word_based: bool,
}

impl HeadSpec {
    pub const fn learned() -> Self {
        Self {
            kind: PatternKind::Learned,
            word_based: false,
        }
    }

    pub const fn token(kind: PatternKind) -> Self {
        Self {
            kind,
            word_based: false,
        }
    }

    pub const fn word(kind: PatternKind) -> Self {
        Self { kind, word_based: true }
    }

    pub fn is_learned(&self) -> bool {
        self.kind == PatternKind::Learned
    }

    pub fn variant(&self) -> PatternVariant {
        if self.word_based {
            PatternVariant::Word
        } else {
            PatternVariant::Token
        }
    }
}

/// Encoder head layouts named after the usual row labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeadPreset {
    /// Eight learned heads.
    AllLearned,
    /// Seven token-based fixed heads plus one learned head.
    FixedToken,
    /// Seven word-based fixed heads plus one learned head.
    FixedWord,
    /// Eight token-based fixed heads (the eighth attends the last token).
    AllFixed,
    /// A single learned head.
    SingleLearned,
}

impl HeadPreset {
    pub const ALL: [HeadPreset; 5] = [
        HeadPreset::AllLearned,
        HeadPreset::FixedToken,
        HeadPreset::FixedWord,
        HeadPreset::AllFixed,
        HeadPreset::SingleLearned,
    ];

    pub fn label(self) -> &'static str {
        match self {
            HeadPreset::AllLearned => "8L",
            HeadPreset::FixedToken => "7Ftoken+1L",
            HeadPreset::FixedWord => "7Fword+1L",
            HeadPreset::AllFixed => "8Ftoken",
            HeadPreset::SingleLearned => "1L",
        }
    }

    pub fn specs(self) -> Vec<HeadSpec> {
        let seven = &PatternKind::FIXED[..7];
        match self {
            HeadPreset::AllLearned => vec![HeadSpec::learned(); 8],
            HeadPreset::FixedToken => seven
                .iter()
                .map(|&k| HeadSpec::token(k))
                .chain([HeadSpec::learned()])
                .collect(),
            HeadPreset::FixedWord => seven
                .iter()
                .map(|&k| HeadSpec::word(k))
                .chain([HeadSpec::learned()])
                .collect(),
            HeadPreset::AllFixed => PatternKind::FIXED.iter().map(|&k| HeadSpec::token(k)).collect(),
            HeadPreset::SingleLearned => vec![HeadSpec::learned()],
        }
    }
}

impl fmt::Display for HeadPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for HeadPreset {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HeadPreset::ALL
            .iter()
            .copied()
            .find(|p| p.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                ModelError::Config(format!(
                    "unknown head spec {s:?}; valid specs are {{{}}}",
                    HeadPreset::ALL.map(|p| p.label()).join(", ")
                ))
            })
    }
}

/// Model shape. Serialised as JSON next to every checkpoint. Missing
/// fields take the toy defaults when deserialising.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    /// Encoder self-attention heads per layer.
    pub n_heads: usize,
    pub d_ff: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    /// One spec per encoder head, repeated in every encoder layer.
    pub enc_head_specs: Vec<HeadSpec>,
    pub dropout: f64,
    pub max_len: usize,
    pub seed: u64,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    /// Heads in decoder attention; defaults to `n_heads`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dec_heads: Option<usize>,
}

impl Default for ModelConfig {
    /// Toy shape with seven fixed token heads; vocabulary sizes are left at
    /// zero for the caller to fill in.
    fn default() -> Self {
        Self::toy(HeadPreset::FixedToken, 0)
    }
}

impl ModelConfig {
    /// Small configuration for the toy tasks.
    pub fn toy(preset: HeadPreset, vocab: usize) -> Self {
        let mut cfg = Self {
            d_model: 64,
            n_heads: 8,
            d_ff: 128,
            enc_layers: 2,
            dec_layers: 1,
            enc_head_specs: Vec::new(),
            dropout: 0.0,
            max_len: 64,
            seed: 1,
            src_vocab: vocab,
            tgt_vocab: vocab,
            dec_heads: None,
        };
        cfg.apply_preset(preset);
        cfg
    }

    /// Shape of the base model (512 wide, 8 heads, 6+6 layers).
    pub fn base(preset: HeadPreset, src_vocab: usize, tgt_vocab: usize) -> Self {
        let mut cfg = Self {
            d_model: 512,
            n_heads: 8,
            d_ff: 2048,
            enc_layers: 6,
            dec_layers: 6,
            enc_head_specs: Vec::new(),
            dropout: 0.1,
            max_len: 256,
            seed: 1,
            src_vocab,
            tgt_vocab,
            dec_heads: None,
        };
        cfg.apply_preset(preset);
        cfg
    }

    /// Replace the encoder head layout. The decoder keeps its current head
    /// count, so switching to a single encoder head leaves it unchanged.
    pub fn apply_preset(&mut self, preset: HeadPreset) {
        let dec = self.decoder_heads();
        self.enc_head_specs = preset.specs();
        self.n_heads = self.enc_head_specs.len();
        self.dec_heads = (dec != self.n_heads).then_some(dec);
    }

    /// The preset matching the current head specs, if any.
    pub fn preset(&self) -> Option<HeadPreset> {
        HeadPreset::ALL.into_iter().find(|p| p.specs() == self.enc_head_specs)
    }

    pub fn decoder_heads(&self) -> usize {
        self.dec_heads.unwrap_or(self.n_heads)
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads.max(1)
    }

    pub fn learned_heads(&self) -> usize {
        self.enc_head_specs.iter().filter(|s| s.is_learned()).count()
    }

    pub fn uses_word_patterns(&self) -> bool {
        self.enc_head_specs.iter().any(|s| !s.is_learned() && s.word_based)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |field: &str, msg: String| Err(ModelError::Config(format!("{field}: {msg}")));
        if self.d_model == 0 {
            return fail("d_model", "must be positive".into());
        }
        if self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return fail(
                "n_heads",
                format!("d_model {} is not divisible by {} heads", self.d_model, self.n_heads),
            );
        }
        let dec = self.decoder_heads();
        if dec == 0 || !self.d_model.is_multiple_of(dec) {
            return fail(
                "dec_heads",
                format!("d_model {} is not divisible by {dec} heads", self.d_model),
            );
        }
        if self.enc_head_specs.len() != self.n_heads {
            return fail(
                "enc_head_specs",
                format!("{} specs for {} heads", self.enc_head_specs.len(), self.n_heads),
            );
        }
        if self.d_ff == 0 {
            return fail("d_ff", "must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout", format!("{} is outside [0, 1)", self.dropout));
        }
        if self.max_len == 0 {
            return fail("max_len", "must be positive".into());
        }
        if self.src_vocab <= crate::data::RESERVED.len() {
            return fail("src_vocab", format!("{} leaves no regular tokens", self.src_vocab));
        }
        if self.tgt_vocab <= crate::data::RESERVED.len() {
            return fail("tgt_vocab", format!("{} leaves no regular tokens", self.tgt_vocab));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_labels_round_trip() {
        for p in HeadPreset::ALL {
            assert_eq!(p.label().parse::<HeadPreset>().unwrap(), p);
        }
        let err = "9F".parse::<HeadPreset>().unwrap_err().to_string();
        for label in ["8L", "7Ftoken+1L", "7Fword+1L", "8Ftoken", "1L"] {
            assert!(err.contains(label), "{err}");
        }
    }

    #[test]
    fn preset_layouts() {
        let specs = HeadPreset::FixedToken.specs();
        assert_eq!(specs.len(), 8);
        assert_eq!(specs[1], HeadSpec::token(PatternKind::PrevToken));
        assert!(specs[7].is_learned());
        assert!(HeadPreset::FixedWord.specs()[..7].iter().all(|s| s.word_based));
        assert_eq!(HeadPreset::AllFixed.specs()[7].kind, PatternKind::LastToken);
    }

    #[test]
    fn single_head_keeps_decoder_width() {
        let cfg = ModelConfig::toy(HeadPreset::SingleLearned, 20);
        assert_eq!(cfg.n_heads, 1);
        assert_eq!(cfg.decoder_heads(), 8);
        assert_eq!(cfg.head_dim(), 64);
        cfg.validate().unwrap();
        let cfg = ModelConfig::toy(HeadPreset::FixedToken, 20);
        assert_eq!(cfg.dec_heads, None);
        assert_eq!(cfg.preset(), Some(HeadPreset::FixedToken));
    }

    #[test]
    fn json_field_names() {
        let cfg = ModelConfig::toy(HeadPreset::FixedToken, 20);
        let v: serde_json::Value = serde_json::to_value(&cfg).unwrap();
        for key in [
            "d_model",
            "n_heads",
            "d_ff",
            "enc_layers",
            "dec_layers",
            "enc_head_specs",
            "dropout",
            "max_len",
            "seed",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["enc_head_specs"][1]["kind"], "PrevToken");
        let back: ModelConfig = serde_json::from_value(v).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation_errors_name_fields() {
        let mut cfg = ModelConfig::toy(HeadPreset::AllLearned, 20);
        cfg.d_model = 60;
        assert!(cfg.validate().unwrap_err().to_string().contains("n_heads"));
        let mut cfg = ModelConfig::toy(HeadPreset::AllLearned, 20);
        cfg.enc_head_specs.pop();
        assert!(cfg.validate().unwrap_err().to_string().contains("enc_head_specs"));
    }
}
