//! Token-count batching with padding and loss masks.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::patterns::Segmentation;

use super::corpus::SentencePair;
use super::vocab::{Vocabulary, BOS, EOS, PAD};

/// Id-encoded sentence pair with the source segmentation derived from its
/// `@@` markers.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPair {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
    pub seg: Segmentation,
}

impl EncodedPair {
    pub fn encode(pair: &SentencePair, src_vocab: &Vocabulary, tgt_vocab: &Vocabulary) -> Self {
        Self {
            src: src_vocab.encode(&pair.src),
            tgt: tgt_vocab.encode(&pair.tgt),
            seg: Segmentation::from_subwords(&pair.src),
        }
    }
}

/// Padded batch. Targets are shifted: the decoder reads `<s> y1 .. yn` and
/// predicts `y1 .. yn </s>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    /// `[size, src_len]`, row-major, padded with `PAD`.
    pub src_ids: Vec<usize>,
    pub src_lengths: Vec<usize>,
    pub src_len: usize,
    /// `[size, tgt_len]` decoder inputs.
    pub tgt_in: Vec<usize>,
    /// `[size, tgt_len]` prediction targets.
    pub tgt_out: Vec<usize>,
    /// Target lengths including the end-of-sentence token.
    pub tgt_lengths: Vec<usize>,
    pub tgt_len: usize,
    /// 1.0 on real target positions, 0.0 on padding.
    pub loss_mask: Vec<f64>,
    pub segs: Option<Vec<Segmentation>>,
}

impl Batch {
    pub fn new(src: &[&[usize]], tgt: &[&[usize]], segs: Option<Vec<Segmentation>>) -> Self {
        assert_eq!(src.len(), tgt.len(), "source/target count mismatch");
        let size = src.len();
        let src_lengths: Vec<usize> = src.iter().map(|s| s.len()).collect();
        let tgt_lengths: Vec<usize> = tgt.iter().map(|t| t.len() + 1).collect();
        let src_len = src_lengths.iter().copied().max().unwrap_or(0);
        let tgt_len = tgt_lengths.iter().copied().max().unwrap_or(0);
        let mut src_ids = vec![PAD; size * src_len];
        let mut tgt_in = vec![PAD; size * tgt_len];
        let mut tgt_out = vec![PAD; size * tgt_len];
        let mut loss_mask = vec![0.0; size * tgt_len];
        for b in 0..size {
            src_ids[b * src_len..b * src_len + src[b].len()].copy_from_slice(src[b]);
            let row = b * tgt_len;
            tgt_in[row] = BOS;
            tgt_in[row + 1..row + 1 + tgt[b].len()].copy_from_slice(tgt[b]);
            tgt_out[row..row + tgt[b].len()].copy_from_slice(tgt[b]);
            tgt_out[row + tgt[b].len()] = EOS;
            loss_mask[row..row + tgt_lengths[b]].iter_mut().for_each(|m| *m = 1.0);
        }
        Self {
            size,
            src_ids,
            src_lengths,
            src_len,
            tgt_in,
            tgt_out,
            tgt_lengths,
            tgt_len,
            loss_mask,
            segs,
        }
    }

    pub fn from_pairs(pairs: &[&EncodedPair], attach_segs: bool) -> Self {
        let src: Vec<&[usize]> = pairs.iter().map(|p| p.src.as_slice()).collect();
        let tgt: Vec<&[usize]> = pairs.iter().map(|p| p.tgt.as_slice()).collect();
        let segs = attach_segs.then(|| pairs.iter().map(|p| p.seg.clone()).collect());
        Self::new(&src, &tgt, segs)
    }

    /// Source tokens of sentence `b` without padding.
    pub fn source(&self, b: usize) -> &[usize] {
        &self.src_ids[b * self.src_len..b * self.src_len + self.src_lengths[b]]
    }

    /// Target tokens of sentence `b`, excluding the end-of-sentence marker.
    pub fn target(&self, b: usize) -> &[usize] {
        &self.tgt_out[b * self.tgt_len..b * self.tgt_len + self.tgt_lengths[b] - 1]
    }

    pub fn source_tokens(&self) -> usize {
        self.src_lengths.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchConfig {
    /// Upper bound on source tokens per batch. A single longer sentence
    /// still forms a batch of its own.
    pub max_tokens: usize,
    /// Longest accepted source or target sentence.
    pub max_len: usize,
    /// `None` keeps corpus order.
    pub shuffle_seed: Option<u64>,
    pub attach_segs: bool,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            max_tokens: 1000,
            max_len: 256,
            shuffle_seed: None,
            attach_segs: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SkipCounts {
    pub empty: usize,
    pub too_long: usize,
    /// Source tokens in skipped sentences.
    pub tokens: usize,
}

/// Iterator over the batches of one pass through a corpus.
#[derive(Debug)]
pub struct BatchIter<'a> {
    pairs: &'a [EncodedPair],
    groups: std::vec::IntoIter<Vec<usize>>,
    attach_segs: bool,
    skipped: SkipCounts,
}

impl BatchIter<'_> {
    pub fn skipped(&self) -> SkipCounts {
        self.skipped
    }
}

impl Iterator for BatchIter<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        let group = self.groups.next()?;
        let members: Vec<&EncodedPair> = group.iter().map(|&i| &self.pairs[i]).collect();
        Some(Batch::from_pairs(&members, self.attach_segs))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.groups.size_hint()
    }
}

/// Group sentences into batches capped by source token count. Empty and
/// over-long sentences are skipped, counted and reported with a warning.
pub fn batch_iter<'a>(pairs: &'a [EncodedPair], cfg: &BatchConfig) -> BatchIter<'a> {
    let mut skipped = SkipCounts::default();
    let mut order: Vec<usize> = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        if p.src.is_empty() || p.tgt.is_empty() {
            skipped.empty += 1;
            skipped.tokens += p.src.len();
        } else if p.src.len() > cfg.max_len || p.tgt.len() > cfg.max_len {
            skipped.too_long += 1;
            skipped.tokens += p.src.len();
        } else {
            order.push(i);
        }
    }
    if skipped.empty + skipped.too_long > 0 {
        log::warn!(
            "skipped {} empty and {} over-long sentence pairs",
            skipped.empty,
            skipped.too_long
        );
    }
    if let Some(seed) = cfg.shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut groups = Vec::new();
    let mut current = Vec::new();
    let mut tokens = 0;
    for i in order {
        let n = pairs[i].src.len();
        if !current.is_empty() && tokens + n > cfg.max_tokens {
            groups.push(std::mem::take(&mut current));
            tokens = 0;
        }
        current.push(i);
        tokens += n;
    }
    if !current.is_empty() {
        groups.push(current);
    }
    BatchIter {
        pairs,
        groups: groups.into_iter(),
        attach_segs: cfg.attach_segs,
        skipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(src: &[usize], tgt: &[usize]) -> EncodedPair {
        EncodedPair {
            src: src.to_vec(),
            tgt: tgt.to_vec(),
            seg: Segmentation::identity(src.len()),
        }
    }

    #[test]
    fn padding_and_masks() {
        let a = pair(&[4, 5], &[6]);
        let b = pair(&[7], &[8, 9, 10]);
        let batch = Batch::from_pairs(&[&a, &b], false);
        assert_eq!(batch.src_ids, vec![4, 5, 7, PAD]);
        assert_eq!(batch.tgt_len, 4);
        assert_eq!(batch.tgt_in, vec![BOS, 6, PAD, PAD, BOS, 8, 9, 10]);
        assert_eq!(batch.tgt_out, vec![6, EOS, PAD, PAD, 8, 9, 10, EOS]);
        assert_eq!(batch.loss_mask, vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(batch.source(1), &[7]);
        assert_eq!(batch.target(1), &[8, 9, 10]);
        for (m, &t) in batch.loss_mask.iter().zip(&batch.tgt_out) {
            assert_eq!(*m == 0.0, t == PAD);
        }
    }

    #[test]
    fn token_cap() {
        let pairs: Vec<EncodedPair> = (0..5).map(|_| pair(&[4, 4, 4, 4], &[5])).collect();
        let cfg = BatchConfig {
            max_tokens: 10,
            ..Default::default()
        };
        let sizes: Vec<usize> = batch_iter(&pairs, &cfg).map(|b| b.size).collect();
        assert_eq!(sizes, vec![2, 2, 1]);
    }

    #[test]
    fn skips_are_counted() {
        let pairs = vec![pair(&[4], &[5]), pair(&[], &[5]), pair(&[4; 9], &[5]), pair(&[4, 4], &[])];
        let cfg = BatchConfig {
            max_tokens: 100,
            max_len: 8,
            ..Default::default()
        };
        let it = batch_iter(&pairs, &cfg);
        let skipped = it.skipped();
        assert_eq!(skipped.empty, 2);
        assert_eq!(skipped.too_long, 1);
        let total: usize = it.map(|b| b.source_tokens()).sum();
        assert_eq!(total + skipped.tokens, 12);
    }

    #[test]
    fn segmentations_attached_on_request() {
        let pairs = vec![pair(&[4, 5], &[6])];
        let cfg = BatchConfig {
            attach_segs: true,
            ..Default::default()
        };
        let b = batch_iter(&pairs, &cfg).next().unwrap();
        assert_eq!(b.segs.unwrap()[0], Segmentation::identity(2));
    }

    proptest! {
        #[test]
        fn batching_conserves_sentences(lens in proptest::collection::vec(0usize..12, 0..60), cap in 1usize..40, seed in any::<u64>()) {
            let pairs: Vec<EncodedPair> = lens.iter().enumerate()
                .map(|(i, &n)| pair(&vec![4 + i; n], &[5]))
                .collect();
            let cfg = BatchConfig { max_tokens: cap, max_len: 10, shuffle_seed: Some(seed), attach_segs: false };
            let it = batch_iter(&pairs, &cfg);
            let skipped = it.skipped();
            let mut seen: Vec<usize> = Vec::new();
            let mut tokens = 0;
            for b in it {
                prop_assert!(b.source_tokens() <= cap || b.size == 1);
                tokens += b.source_tokens();
                for i in 0..b.size {
                    seen.push(b.source(i)[0] - 4);
                }
            }
            let mut expected: Vec<usize> = lens.iter().enumerate().filter(|(_, &n)| n > 0 && n <= 10).map(|(i, _)| i).collect();
            seen.sort_unstable();
            expected.sort_unstable();
            prop_assert_eq!(seen, expected);
            prop_assert_eq!(tokens + skipped.tokens, lens.iter().sum::<usize>());

            let again: Vec<Batch> = batch_iter(&pairs, &cfg).collect();
            let first: Vec<Batch> = batch_iter(&pairs, &cfg).collect();
            prop_assert_eq!(again, first);
        }
    }
}
