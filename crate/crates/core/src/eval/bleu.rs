//! Corpus-level BLEU-4 on whitespace-tokenised, lowercased text.

use std::collections::HashMap;

use serde::Serialize;

use super::EvalError;

pub const MAX_ORDER: usize = 4;

/// Reference-length bucket edges: `<10, [10,20), ..., [50,60), >=60`.
pub const DEFAULT_BUCKET_EDGES: [usize; 6] = [10, 20, 30, 40, 50, 60];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuOptions {
    /// Add one to every n-gram match and total count.
    pub smoothing: bool,
}

/// Sufficient statistics of one or more sentence pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl std::ops::AddAssign for BleuStats {
    fn add_assign(&mut self, o: Self) {
        for n in 0..MAX_ORDER {
            self.matches[n] += o.matches[n];
            self.totals[n] += o.totals[n];
        }
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuReport {
    pub bleu: f64,
    pub precisions: [f64; MAX_ORDER],
    pub bp: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_lowercase).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

impl BleuStats {
    pub fn sentence(hyp: &str, reference: &str) -> Self {
        let h = tokenize(hyp);
        let r = tokenize(reference);
        let mut s = BleuStats {
            hyp_len: h.len(),
            ref_len: r.len(),
            ..Default::default()
        };
        for n in 1..=MAX_ORDER {
            let hc = ngram_counts(&h, n);
            let rc = ngram_counts(&r, n);
            s.totals[n - 1] = h.len().saturating_sub(n - 1);
            s.matches[n - 1] = hc
                .iter()
                .map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0)))
                .sum();
        }
        s
    }

    pub fn report(&self, opts: BleuOptions) -> BleuReport {
        let add = usize::from(opts.smoothing);
        let mut precisions = [0.0; MAX_ORDER];
        for (n, p) in precisions.iter_mut().enumerate() {
            let total = self.totals[n] + add;
            *p = if total == 0 {
                0.0
            } else {
                (self.matches[n] + add) as f64 / total as f64
            };
        }
        let bp = if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        };
        let bleu = if precisions.contains(&0.0) {
            0.0
        } else {
            let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
            100.0 * bp * log_mean.exp()
        };
        BleuReport {
            bleu,
            precisions,
            bp,
            hyp_len: self.hyp_len,
            ref_len: self.ref_len,
        }
    }
}

fn check_inputs<S: AsRef<str>>(hyps: &[S], refs: &[S]) -> Result<(), EvalError> {
    if hyps.len() != refs.len() {
        return Err(EvalError::InvalidInput(format!(
            "{} hypotheses for {} references",
            hyps.len(),
            refs.len()
        )));
    }
    if hyps.is_empty() {
        return Err(EvalError::InvalidInput("empty corpus".into()));
    }
    Ok(())
}

/// Per-sentence statistics, aligned with the inputs.
pub fn sentence_stats<S: AsRef<str>>(hyps: &[S], refs: &[S]) -> Result<Vec<BleuStats>, EvalError> {
    check_inputs(hyps, refs)?;
    Ok(hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| BleuStats::sentence(h.as_ref(), r.as_ref()))
        .collect())
}

pub fn corpus_bleu<S: AsRef<str>>(hyps: &[S], refs: &[S]) -> Result<BleuReport, EvalError> {
    corpus_bleu_with(hyps, refs, BleuOptions::default())
}

pub fn corpus_bleu_with<S: AsRef<str>>(hyps: &[S], refs: &[S], opts: BleuOptions) -> Result<BleuReport, EvalError> {
    let mut total = BleuStats::default();
    for s in sentence_stats(hyps, refs)? {
        total += s;
    }
    Ok(total.report(opts))
}

/// BLEU of the sentences whose reference length falls in `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketReport {
    pub label: String,
    pub lo: usize,
    pub hi: Option<usize>,
    pub sentences: usize,
    pub report: BleuReport,
}

fn bucket_label(lo: usize, hi: Option<usize>) -> String {
    match (lo, hi) {
        (0, None) => "all".to_string(),
        (0, Some(h)) => format!("<{h}"),
        (l, Some(h)) => format!("[{l},{h})"),
        (l, None) => format!("≥{l}"),
    }
}

/// Split sentences by reference token count at `edges` and score each
/// bucket. Buckets without sentences are left out.
pub fn bucketed_bleu<S: AsRef<str>>(hyps: &[S], refs: &[S], edges: &[usize], opts: BleuOptions) -> Result<Vec<BucketReport>, EvalError> {
    if edges.windows(2).any(|w| w[0] >= w[1]) || edges.first() == Some(&0) {
        return Err(EvalError::InvalidInput(format!("bucket edges {edges:?} are not strictly increasing and positive")));
    }
    let stats = sentence_stats(hyps, refs)?;
    let mut bounds: Vec<(usize, Option<usize>)> = Vec::with_capacity(edges.len() + 1);
    let mut lo = 0;
    for &e in edges {
        bounds.push((lo, Some(e)));
        lo = e;
    }
    bounds.push((lo, None));

    let mut buckets: Vec<(BleuStats, usize)> = vec![(BleuStats::default(), 0); bounds.len()];
    for s in &stats {
        let idx = edges.partition_point(|&e| e <= s.ref_len);
        buckets[idx].0 += *s;
        buckets[idx].1 += 1;
    }
    Ok(bounds
        .into_iter()
        .zip(buckets)
        .filter(|(_, (_, n))| *n > 0)
        .map(|((lo, hi), (s, n))| BucketReport {
            label: bucket_label(lo, hi),
            lo,
            hi,
            sentences: n,
            report: s.report(opts),
        })
        .collect())
}
