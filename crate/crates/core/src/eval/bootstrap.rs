//! Paired bootstrap resampling over sentence indices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::bleu::{sentence_stats, BleuOptions, BleuStats};
use super::EvalError;

pub const DEFAULT_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapReport {
    pub n_resamples: usize,
    pub bleu_a: f64,
    pub bleu_b: f64,
    /// Resamples where system A scores strictly higher.
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
    /// `1 - wins_a / n_resamples`: p-value for "A is not better than B".
    pub p_value: f64,
}

/// Resample `n_resamples` corpora of the same size with replacement and
/// compare the two systems on each. Resample `i` draws from its own
/// ChaCha stream `i` of `seed`, so results do not depend on evaluation
/// order.
pub fn paired_bootstrap<S: AsRef<str>>(
    hyps_a: &[S],
    hyps_b: &[S],
    refs: &[S],
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapReport, EvalError> {
    if n_resamples == 0 {
        return Err(EvalError::InvalidInput("n_resamples must be positive".into()));
    }
    let a = sentence_stats(hyps_a, refs)?;
    let b = sentence_stats(hyps_b, refs)?;
    let opts = BleuOptions::default();
    let total = |s: &[BleuStats]| {
        let mut t = BleuStats::default();
        s.iter().for_each(|x| t += *x);
        t.report(opts).bleu
    };
    let n = a.len();
    let (mut wins_a, mut wins_b, mut ties) = (0, 0, 0);
    for i in 0..n_resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut sa = BleuStats::default();
        let mut sb = BleuStats::default();
        for _ in 0..n {
            let k = rng.gen_range(0..n);
            sa += a[k];
            sb += b[k];
        }
        let (ba, bb) = (sa.report(opts).bleu, sb.report(opts).bleu);
        if ba > bb {
            wins_a += 1;
        } else if bb > ba {
            wins_b += 1;
        } else {
            ties += 1;
        }
    }
    Ok(BootstrapReport {
        n_resamples,
        bleu_a: total(&a),
        bleu_b: total(&b),
        wins_a,
        wins_b,
        ties,
        p_value: 1.0 - wins_a as f64 / n_resamples as f64,
    })
}
