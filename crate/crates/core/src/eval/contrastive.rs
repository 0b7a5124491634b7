//! Accuracy of a model at preferring references over corrupted variants.

use std::collections::BTreeMap;

use serde::Serialize;

use super::EvalError;

/// Sequence scores of a reference and its contrastive variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoredPair {
    pub reference: f64,
    pub contrastive: f64,
    pub attribute: Option<i64>,
}

impl ScoredPair {
    /// Ties count as failures.
    pub fn correct(&self) -> bool {
        self.reference > self.contrastive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccuracyCount {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
}

impl AccuracyCount {
    fn from_counts(correct: usize, total: usize) -> Self {
        Self {
            accuracy: correct as f64 / total as f64,
            correct,
            total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastiveReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// Accuracy per attribute value; pairs without an attribute are only
    /// counted in the overall figure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub by_attribute: Option<BTreeMap<i64, AccuracyCount>>,
}

pub fn contrastive_accuracy(pairs: &[ScoredPair], by_attribute: bool) -> Result<ContrastiveReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::InvalidInput("no contrastive pairs".into()));
    }
    if let Some(p) = pairs.iter().find(|p| !p.reference.is_finite() || !p.contrastive.is_finite()) {
        return Err(EvalError::InvalidInput(format!(
            "non-finite score in pair ({}, {})",
            p.reference, p.contrastive
        )));
    }
    let correct = pairs.iter().filter(|p| p.correct()).count();
    let by_attribute = by_attribute.then(|| {
        let mut groups: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
        for p in pairs {
            if let Some(a) = p.attribute {
                let g = groups.entry(a).or_default();
                g.0 += usize::from(p.correct());
                g.1 += 1;
            }
        }
        groups
            .into_iter()
            .map(|(a, (c, t))| (a, AccuracyCount::from_counts(c, t)))
            .collect()
    });
    let overall = AccuracyCount::from_counts(correct, pairs.len());
    Ok(ContrastiveReport {
        accuracy: overall.accuracy,
        correct,
        total: pairs.len(),
        by_attribute,
    })
}
