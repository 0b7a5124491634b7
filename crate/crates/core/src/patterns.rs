//! Fixed, non-learnable encoder attention patterns.
//!
//! Every fixed head replaces the softmax energy of a learned head with a
//! row-stochastic `n x n` matrix that depends only on token positions
//! (token-based variant) or on word positions expanded back onto the
//! subwords (word-based variant). Positions are 0-based; the last token of a
//! sentence of length `n` sits at `n - 1`.
//!
//! Rows whose support would be empty (e.g. "previous token" for the first
//! token) fall back to a weight of 1.0 on the token itself.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Continuation marker carried by non-final subwords of a word.
pub const CONTINUATION_MARKER: &str = "@@";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatternError {
    #[error("empty support: weight range [{lo}, {hi}] contains no position")]
    EmptySupport { lo: usize, hi: usize },
    #[error("pattern kind {0} has no fixed matrix")]
    InvalidKind(PatternKind),
    #[error("invalid sequence length {0}")]
    InvalidLength(usize),
    #[error("segmentation mismatch: {0}")]
    SegmentationMismatch(String),
    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),
    #[error("usage error: {0}")]
    UsageError(String),
}

/// Which energy source an attention head uses.
///
/// The first seven fixed kinds are the positional patterns; `LastToken` is
/// the optional eighth fixed head. `Learned` marks ordinary scaled
/// dot-product attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternKind {
    CurrentToken,
    PrevToken,
    NextToken,
    LeftContext,
    RightContext,
    EndOfSentence,
    StartOfSentence,
    LastToken,
    Learned,
}

impl PatternKind {
    /// The eight fixed kinds in head order.
    pub const FIXED: [PatternKind; 8] = [
        PatternKind::CurrentToken,
        PatternKind::PrevToken,
        PatternKind::NextToken,
        PatternKind::LeftContext,
        PatternKind::RightContext,
        PatternKind::EndOfSentence,
        PatternKind::StartOfSentence,
        PatternKind::LastToken,
    ];

    pub fn is_fixed(self) -> bool {
        self != PatternKind::Learned
    }

    /// Short lowercase name used on the command line.
    pub fn short_name(self) -> &'static str {
        match self {
            PatternKind::CurrentToken => "current",
            PatternKind::PrevToken => "prev",
            PatternKind::NextToken => "next",
            PatternKind::LeftContext => "left",
            PatternKind::RightContext => "right",
            PatternKind::EndOfSentence => "end",
            PatternKind::StartOfSentence => "start",
            PatternKind::LastToken => "last",
            PatternKind::Learned => "learned",
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for PatternKind {
    type Err = PatternError;

    /// Accepts the variant name, the short name, or the 1-based pattern
    /// number (1..=8).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        if let Ok(num) = lower.parse::<usize>() {
            if (1..=8).contains(&num) {
                return Ok(PatternKind::FIXED[num - 1]);
            }
        }
        PatternKind::FIXED
            .iter()
            .copied()
            .chain(std::iter::once(PatternKind::Learned))
            .find(|k| k.short_name() == lower || k.to_string().to_ascii_lowercase() == lower)
            .ok_or_else(|| {
                PatternError::UsageError(format!(
                    "unknown pattern kind {s:?}; expected one of current, prev, next, left, right, end, start, last or 1..8"
                ))
            })
    }
}

/// Token-based or word-based realisation of a fixed pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternVariant {
    Token,
    Word,
}

/// Dense row-major `n x n` matrix of attention energies.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternMatrix {
    n: usize,
    data: Vec<f64>,
}

impl PatternMatrix {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n.max(1))
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    /// Copy into the top-left corner of a `size x size` matrix. Padding rows
    /// attend to themselves, padding columns of real rows stay zero.
    pub fn padded(&self, size: usize) -> PatternMatrix {
        assert!(size >= self.n, "cannot pad {} to {}", self.n, size);
        let mut out = PatternMatrix::zeros(size);
        for i in 0..self.n {
            out.row_mut(i)[..self.n].copy_from_slice(self.row(i));
        }
        for i in self.n..size {
            out.row_mut(i)[i] = 1.0;
        }
        out
    }
}

/// Mapping from subword positions to word indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    word_of: Vec<usize>,
    m: usize,
}

impl Segmentation {
    /// Validates that `word_of` starts at 0, never decreases and grows by at
    /// most one per position.
    pub fn new(word_of: Vec<usize>) -> Result<Self, PatternError> {
        let mut prev: Option<usize> = None;
        for (p, &w) in word_of.iter().enumerate() {
            let ok = match prev {
                None => w == 0,
                Some(q) => w == q || w == q + 1,
            };
            if !ok {
                return Err(PatternError::InvalidSegmentation(format!(
                    "word index {w} at position {p} breaks contiguity"
                )));
            }
            prev = Some(w);
        }
        let m = prev.map_or(0, |w| w + 1);
        Ok(Self { word_of, m })
    }

    /// One word per subword.
    pub fn identity(n: usize) -> Self {
        Self {
            word_of: (0..n).collect(),
            m: n,
        }
    }

    /// Derive the segmentation from subword tokens, where every non-final
    /// subword of a word ends with `@@`.
    pub fn from_subwords<S: AsRef<str>>(tokens: &[S]) -> Self {
        let mut word_of = Vec::with_capacity(tokens.len());
        let mut word = 0;
        for (p, tok) in tokens.iter().enumerate() {
            word_of.push(word);
            let continues = tok.as_ref().ends_with(CONTINUATION_MARKER);
            if !continues && p + 1 < tokens.len() {
                word += 1;
            }
        }
        let m = if tokens.is_empty() { 0 } else { word + 1 };
        Self { word_of, m }
    }

    /// Parse one whitespace-separated line of subword tokens.
    pub fn from_line(line: &str) -> Self {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        Self::from_subwords(&tokens)
    }

    pub fn len(&self) -> usize {
        self.word_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_of.is_empty()
    }

    pub fn num_words(&self) -> usize {
        self.m
    }

    pub fn word_of(&self) -> &[usize] {
        &self.word_of
    }

    fn word_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.m];
        for &w in &self.word_of {
            sizes[w] += 1;
        }
        sizes
    }
}

/// Cubic weights over the inclusive range `[lo, hi]`, normalised to sum 1.
///
/// Ascending weights grow as `(j - lo + 1)^3`; descending weights grow
/// towards `lo` as `(hi - j + 1)^3`.
pub fn cubic_weights(lo: usize, hi: usize, ascending: bool) -> Result<Vec<f64>, PatternError> {
    if lo > hi {
        return Err(PatternError::EmptySupport { lo, hi });
    }
    let len = hi - lo + 1;
    let raw: Vec<f64> = (0..len)
        .map(|k| {
            let rank = if ascending { k + 1 } else { len - k } as f64;
            rank * rank * rank
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

fn place_cubic(row: &mut [f64], lo: usize, hi: usize, ascending: bool) -> Result<(), PatternError> {
    let weights = cubic_weights(lo, hi, ascending)?;
    row[lo..=hi].copy_from_slice(&weights);
    Ok(())
}

/// Token-based pattern over a sentence of `n` subword tokens.
pub fn build_token_pattern(kind: PatternKind, n: usize) -> Result<PatternMatrix, PatternError> {
    if kind == PatternKind::Learned {
        return Err(PatternError::InvalidKind(kind));
    }
    if n == 0 {
        return Err(PatternError::InvalidLength(n));
    }
    let mut out = PatternMatrix::zeros(n);
    let last = n - 1;
    for i in 0..n {
        let row = out.row_mut(i);
        let filled = match kind {
            PatternKind::CurrentToken => {
                row[i] = 1.0;
                true
            }
            PatternKind::PrevToken if i >= 1 => {
                row[i - 1] = 1.0;
                true
            }
            PatternKind::NextToken if i < last => {
                row[i + 1] = 1.0;
                true
            }
            PatternKind::LeftContext if i >= 2 => {
                place_cubic(row, 0, i - 2, true)?;
                true
            }
            PatternKind::RightContext if i + 2 <= last => {
                place_cubic(row, i + 2, last, false)?;
                true
            }
            PatternKind::EndOfSentence => {
                place_cubic(row, 0, last, true)?;
                true
            }
            PatternKind::StartOfSentence => {
                place_cubic(row, 0, last, false)?;
                true
            }
            PatternKind::LastToken => {
                row[last] = 1.0;
                true
            }
            _ => false,
        };
        if !filled {
            row[i] = 1.0;
        }
    }
    Ok(out)
}

/// Word-based pattern: the token pattern is computed over words and each
/// word's mass is split evenly over its subwords.
pub fn build_word_pattern(kind: PatternKind, seg: &Segmentation) -> Result<PatternMatrix, PatternError> {
    if kind == PatternKind::Learned {
        return Err(PatternError::InvalidKind(kind));
    }
    let words = build_token_pattern(kind, seg.num_words())?;
    let sizes = seg.word_sizes();
    let n = seg.len();
    let mut out = PatternMatrix::zeros(n);
    for p in 0..n {
        let word_row = words.row(seg.word_of[p]);
        let row = out.row_mut(p);
        for (q, &wq) in seg.word_of.iter().enumerate() {
            row[q] = word_row[wq] / sizes[wq] as f64;
        }
    }
    Ok(out)
}

/// Build one pattern for a single sentence.
pub fn build_pattern(
    kind: PatternKind,
    variant: PatternVariant,
    n: usize,
    seg: Option<&Segmentation>,
) -> Result<PatternMatrix, PatternError> {
    match variant {
        PatternVariant::Token => build_token_pattern(kind, n),
        PatternVariant::Word => {
            let seg = seg.ok_or_else(|| {
                PatternError::SegmentationMismatch("word-based pattern requires a segmentation".into())
            })?;
            if seg.len() != n {
                return Err(PatternError::SegmentationMismatch(format!(
                    "segmentation covers {} positions but the sentence has {n}",
                    seg.len()
                )));
            }
            build_word_pattern(kind, seg)
        }
    }
}

/// Patterns for every fixed head of a batch, padded to the batch maximum.
#[derive(Debug, Clone, Default)]
pub struct PatternBank {
    max_len: usize,
    entries: BTreeMap<(PatternKind, PatternVariant), Vec<PatternMatrix>>,
}

impl PatternBank {
    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn is_empty(&self) -> bool {
        self.entries.values().all(Vec::is_empty)
    }

    /// Padded matrices, one per sentence, for the given head kind.
    pub fn get(&self, kind: PatternKind, variant: PatternVariant) -> Option<&[PatternMatrix]> {
        self.entries.get(&(kind, variant)).map(Vec::as_slice)
    }

    /// All matrices of one kind laid out as a `[batch, max_len, max_len]`
    /// buffer.
    pub fn stacked(&self, kind: PatternKind, variant: PatternVariant) -> Option<Vec<f64>> {
        self.get(kind, variant)
            .map(|ms| ms.iter().flat_map(|m| m.as_slice().iter().copied()).collect())
    }
}

/// Build the padded patterns for every distinct `(kind, variant)` in `heads`.
///
/// Learned heads are ignored. Segmentations must be supplied iff a
/// word-based head is present, one per sentence and matching its length.
pub fn pattern_bank(
    heads: &[(PatternKind, PatternVariant)],
    lengths: &[usize],
    segs: Option<&[Segmentation]>,
) -> Result<PatternBank, PatternError> {
    let needs_segs = heads
        .iter()
        .any(|&(k, v)| k.is_fixed() && v == PatternVariant::Word);
    match (needs_segs, segs) {
        (true, None) => {
            return Err(PatternError::SegmentationMismatch(
                "word-based heads configured but no segmentations supplied".into(),
            ))
        }
        (false, Some(_)) => {
            return Err(PatternError::SegmentationMismatch(
                "segmentations supplied but no word-based head configured".into(),
            ))
        }
        (true, Some(s)) if s.len() != lengths.len() => {
            return Err(PatternError::SegmentationMismatch(format!(
                "{} segmentations for {} sentences",
                s.len(),
                lengths.len()
            )))
        }
        _ => {}
    }
    let max_len = lengths.iter().copied().max().unwrap_or(0);
    let mut entries = BTreeMap::new();
    for &(kind, variant) in heads {
        if !kind.is_fixed() || entries.contains_key(&(kind, variant)) {
            continue;
        }
        let mats = lengths
            .iter()
            .enumerate()
            .map(|(b, &n)| {
                let seg = segs.map(|s| &s[b]);
                build_pattern(kind, variant, n, seg).map(|m| m.padded(max_len))
            })
            .collect::<Result<Vec<_>, _>>()?;
        entries.insert((kind, variant), mats);
    }
    Ok(PatternBank { max_len, entries })
}

/// Render a pattern matrix. Only `"csv"` is supported: one row per line,
/// comma-separated, every value in its shortest exact round-trip decimal form.
pub fn dump_pattern(matrix: &PatternMatrix, format: &str) -> Result<String, PatternError> {
    if !format.eq_ignore_ascii_case("csv") {
        return Err(PatternError::UsageError(format!(
            "unsupported dump format {format:?}; only csv is available"
        )));
    }
    let mut out = String::new();
    for row in matrix.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_row(actual: &[f64], expected: &[f64]) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "{actual:?} vs {expected:?}");
        }
    }

    #[test]
    fn cubic_weights_examples() {
        assert_row(&cubic_weights(0, 2, true).unwrap(), &[1.0 / 36.0, 8.0 / 36.0, 27.0 / 36.0]);
        assert_row(&cubic_weights(0, 2, false).unwrap(), &[27.0 / 36.0, 8.0 / 36.0, 1.0 / 36.0]);
        assert_eq!(cubic_weights(3, 3, true).unwrap(), vec![1.0]);
        assert_eq!(cubic_weights(3, 3, false).unwrap(), vec![1.0]);
        assert_eq!(cubic_weights(4, 3, true), Err(PatternError::EmptySupport { lo: 4, hi: 3 }));
    }

    #[test]
    fn prev_token_with_first_row_fallback() {
        let m = build_token_pattern(PatternKind::PrevToken, 3).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn left_context_row_four() {
        let m = build_token_pattern(PatternKind::LeftContext, 6).unwrap();
        assert_row(m.row(4), &[1.0 / 36.0, 8.0 / 36.0, 27.0 / 36.0, 0.0, 0.0, 0.0]);
        // rows 0 and 1 have no left context
        assert_row(m.row(0), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_row(m.row(1), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn right_context_peaks_next_to_current() {
        let m = build_token_pattern(PatternKind::RightContext, 6).unwrap();
        assert_row(m.row(1), &[0.0, 0.0, 0.0, 27.0 / 36.0, 8.0 / 36.0, 1.0 / 36.0]);
        assert_row(m.row(4), &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn last_token_and_sentence_level_patterns() {
        let m = build_token_pattern(PatternKind::LastToken, 4).unwrap();
        for row in m.rows() {
            assert_eq!(row, &[0.0, 0.0, 0.0, 1.0]);
        }
        let e = build_token_pattern(PatternKind::EndOfSentence, 3).unwrap();
        for row in e.rows() {
            assert_row(row, &[1.0 / 36.0, 8.0 / 36.0, 27.0 / 36.0]);
        }
    }

    #[test]
    fn learned_and_empty_rejected() {
        assert_eq!(
            build_token_pattern(PatternKind::Learned, 3),
            Err(PatternError::InvalidKind(PatternKind::Learned))
        );
        assert_eq!(
            build_token_pattern(PatternKind::CurrentToken, 0),
            Err(PatternError::InvalidLength(0))
        );
    }

    #[test]
    fn word_pattern_shares_split_word() {
        let seg = Segmentation::new(vec![0, 1, 2, 3, 4, 4, 5]).unwrap();
        let m = build_word_pattern(PatternKind::CurrentToken, &seg).unwrap();
        assert_row(m.row(4), &[0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.0]);
        assert_row(m.row(5), &[0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.0]);
        assert_row(m.row(6), &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);

        let seg = Segmentation::new(vec![0, 0, 1]).unwrap();
        let m = build_word_pattern(PatternKind::PrevToken, &seg).unwrap();
        assert_row(m.row(2), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn segmentation_from_markers() {
        let seg = Segmentation::from_line("a master of science fic@@ tion .");
        assert_eq!(seg.word_of(), &[0, 1, 2, 3, 4, 4, 5]);
        assert_eq!(seg.num_words(), 6);
        assert!(Segmentation::from_line("").is_empty());
        // a dangling marker on the last token still closes the word
        assert_eq!(Segmentation::from_line("ab@@ cd@@").word_of(), &[0, 0]);
    }

    #[test]
    fn segmentation_validation() {
        assert!(Segmentation::new(vec![1, 1]).is_err());
        assert!(Segmentation::new(vec![0, 2]).is_err());
        assert!(Segmentation::new(vec![0, 1, 0]).is_err());
        assert_eq!(Segmentation::new(vec![0, 0, 1, 2, 2]).unwrap().num_words(), 3);
    }

    #[test]
    fn bank_padding() {
        let bank = pattern_bank(
            &[(PatternKind::PrevToken, PatternVariant::Token)],
            &[2, 3],
            None,
        )
        .unwrap();
        let mats = bank.get(PatternKind::PrevToken, PatternVariant::Token).unwrap();
        assert_eq!(mats.len(), 2);
        assert_eq!(mats[0].as_slice(), &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(mats[1].as_slice(), &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);

        let empty = pattern_bank(&[(PatternKind::PrevToken, PatternVariant::Token)], &[], None).unwrap();
        assert!(empty.is_empty());

        let single = pattern_bank(&[(PatternKind::RightContext, PatternVariant::Token)], &[1], None).unwrap();
        assert_eq!(
            single.get(PatternKind::RightContext, PatternVariant::Token).unwrap()[0].as_slice(),
            &[1.0]
        );
    }

    #[test]
    fn bank_segmentation_errors() {
        let heads = [(PatternKind::CurrentToken, PatternVariant::Word)];
        assert!(matches!(
            pattern_bank(&heads, &[2], None),
            Err(PatternError::SegmentationMismatch(_))
        ));
        let segs = [Segmentation::identity(3)];
        assert!(matches!(
            pattern_bank(&heads, &[2], Some(&segs)),
            Err(PatternError::SegmentationMismatch(_))
        ));
        let token = [(PatternKind::CurrentToken, PatternVariant::Token)];
        assert!(matches!(
            pattern_bank(&token, &[3], Some(&segs)),
            Err(PatternError::SegmentationMismatch(_))
        ));
    }

    #[test]
    fn dump_format() {
        let m = build_token_pattern(PatternKind::NextToken, 2).unwrap();
        assert_eq!(dump_pattern(&m, "csv").unwrap(), "0.0,1.0\n0.0,1.0\n");
        assert!(matches!(dump_pattern(&m, "json"), Err(PatternError::UsageError(_))));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("2".parse::<PatternKind>().unwrap(), PatternKind::PrevToken);
        assert_eq!("left".parse::<PatternKind>().unwrap(), PatternKind::LeftContext);
        assert_eq!("LastToken".parse::<PatternKind>().unwrap(), PatternKind::LastToken);
        assert!("9".parse::<PatternKind>().is_err());
    }

    #[test]
    fn stochastic_rows_all_kinds() {
        for kind in PatternKind::FIXED {
            for n in 1..=64 {
                let m = build_token_pattern(kind, n).unwrap();
                for row in m.rows() {
                    assert!(row.iter().all(|&v| v >= 0.0));
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{kind} n={n}");
                }
            }
        }
    }

    #[test]
    fn flip_symmetry() {
        for n in 1..=40 {
            let start = build_token_pattern(PatternKind::StartOfSentence, n).unwrap();
            let end = build_token_pattern(PatternKind::EndOfSentence, n).unwrap();
            let left = build_token_pattern(PatternKind::LeftContext, n).unwrap();
            let right = build_token_pattern(PatternKind::RightContext, n).unwrap();
            for i in 0..n {
                let rev: Vec<f64> = end.row(i).iter().rev().copied().collect();
                assert_eq!(start.row(i), rev.as_slice());
                let rev: Vec<f64> = left.row(n - 1 - i).iter().rev().copied().collect();
                assert_eq!(right.row(i), rev.as_slice());
            }
        }
    }

    #[test]
    fn query_independent_kinds() {
        for kind in [PatternKind::EndOfSentence, PatternKind::StartOfSentence, PatternKind::LastToken] {
            let m = build_token_pattern(kind, 9).unwrap();
            assert!(m.rows().all(|r| r == m.row(0)));
        }
    }

    #[test]
    fn word_matches_token_under_identity() {
        for kind in PatternKind::FIXED {
            for n in 1..=32 {
                let seg = Segmentation::identity(n);
                assert_eq!(
                    build_word_pattern(kind, &seg).unwrap(),
                    build_token_pattern(kind, n).unwrap()
                );
            }
        }
    }

    fn random_segmentation() -> impl Strategy<Value = Segmentation> {
        proptest::collection::vec(any::<bool>(), 1..48).prop_map(|breaks| {
            let mut word_of = vec![0usize];
            for b in breaks.iter().skip(1) {
                let last = *word_of.last().unwrap();
                word_of.push(if *b { last + 1 } else { last });
            }
            Segmentation::new(word_of).unwrap()
        })
    }

    proptest! {
        #[test]
        fn word_rows_are_distributions(seg in random_segmentation(), k in 0usize..8) {
            let m = build_word_pattern(PatternKind::FIXED[k], &seg).unwrap();
            for row in m.rows() {
                prop_assert!(row.iter().all(|&v| v >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn deterministic(n in 1usize..64, k in 0usize..8) {
            let a = build_token_pattern(PatternKind::FIXED[k], n).unwrap();
            let b = build_token_pattern(PatternKind::FIXED[k], n).unwrap();
            prop_assert_eq!(a.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            b.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}
