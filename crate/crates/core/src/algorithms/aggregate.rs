//! Score aggregation: mean pooling over summary sentences and min over
//! sub-sentences.
//!
//! The mean uses a correctly rounded sum, so it does not depend on input
//! order and never decreases when one input increases.

use serde::{Deserialize, Serialize};

use crate::error::AlgoError;

/// How sub-sentence scores combine into a sentence score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    #[default]
    Min,
    Mean,
}

impl Aggregator {
    pub fn apply(self, scores: &[f64]) -> Result<f64, AlgoError> {
        match self {
            Aggregator::Min => aggregate_subsentences(scores),
            Aggregator::Mean => aggregate_summary(scores),
        }
    }
}

/// Arithmetic mean of sentence scores.
pub fn aggregate_summary(scores: &[f64]) -> Result<f64, AlgoError> {
    mean(scores).ok_or(AlgoError::EmptyScores)
}

/// Minimum of sub-sentence scores.
pub fn aggregate_subsentences(scores: &[f64]) -> Result<f64, AlgoError> {
    scores
        .iter()
        .copied()
        .reduce(f64::min)
        .ok_or(AlgoError::EmptyScores)
}

pub(crate) fn mean(xs: &[f64]) -> Option<f64> {
    let (lo, hi) = xs
        .iter()
        .fold(None, |acc: Option<(f64, f64)>, &x| match acc {
            None => Some((x, x)),
            Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
        })?;
    Some((fsum(xs) / xs.len() as f64).clamp(lo, hi))
}

/// Correctly rounded floating-point sum (Shewchuk's exact partials).
pub(crate) fn fsum(xs: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for &x in xs {
        let mut x = x;
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    // Sum partials from the top, fixing up round-half-even on the last step.
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        let yr = x - hi;
        if y == yr {
            hi = x;
        }
    }
    hi
}
