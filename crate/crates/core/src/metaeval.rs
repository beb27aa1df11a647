//! Meta-evaluation of faithfulness metrics against human labels.
//!
//! ROC-AUC treats `faithful` as the positive class. Significance between two
//! metrics follows a subsampling protocol: draw the same 70% subset of
//! examples for both systems, repeat 100 times, and run a paired two-sided
//! t-test on the per-round AUC differences.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::domain::{ErrorType, FaithfulLabel};
use crate::error::EvalError;
use crate::scorer::ScorerStats;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_ROUNDS: usize = 100;
pub const DEFAULT_FRACTION: f64 = 0.7;
pub const DEFAULT_BINS: usize = 10;

/// Attempts at drawing a two-class subsample before giving up on a round.
const MAX_REDRAWS: usize = 10_000;

/// One metric score for one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample {
    pub example_id: String,
    pub system_id: String,
    pub score: f64,
    pub label: FaithfulLabel,
}

/// Area under the ROC curve: the probability that a faithful example
/// outscores an unfaithful one, with ties counted as one half.
pub fn roc_auc(scores: &[f64], labels: &[FaithfulLabel]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    if let Some(&bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(EvalError::ScoreOutOfRange(bad));
    }
    let positives = labels.iter().filter(|l| l.is_faithful()).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass);
    }

    // Mann-Whitney U from mid-ranks; all quantities are exact multiples of 1/2.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1..=end share their average.
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let tied_positives = order[start..end]
            .iter()
            .filter(|&&i| labels[i].is_faithful())
            .count();
        positive_rank_sum += mid_rank * tied_positives as f64;
        start = end;
    }
    let p = positives as f64;
    let u = positive_rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Fraction of examples drawn per round.
    pub fraction: f64,
    pub rounds: usize,
    pub seed: u64,
    /// Draw with replacement instead of subsampling.
    pub with_replacement: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            fraction: DEFAULT_FRACTION,
            rounds: DEFAULT_ROUNDS,
            seed: DEFAULT_SEED,
            with_replacement: false,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(EvalError::InvalidSetting("fraction must be in (0, 1]"));
        }
        if self.rounds < 2 {
            return Err(EvalError::InvalidSetting(
                "at least two rounds are needed for a t-test",
            ));
        }
        Ok(())
    }

    pub fn sample_size(&self, n: usize) -> usize {
        ((self.fraction * n as f64).round() as usize).clamp(2, n.max(2))
    }

    /// The example indices used in `round`. Each round has its own RNG
    /// stream derived from the seed, so rounds can be drawn in any order.
    pub fn draw(&self, round: usize, labels: &[FaithfulLabel]) -> Result<Vec<usize>, EvalError> {
        let n = labels.len();
        let size = self.sample_size(n);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(round as u64);
        for _ in 0..MAX_REDRAWS {
            let idx: Vec<usize> = if self.with_replacement {
                (0..size).map(|_| rng.random_range(0..n)).collect()
            } else {
                index::sample(&mut rng, n, size.min(n)).into_vec()
            };
            let faithful = idx.iter().filter(|&&i| labels[i].is_faithful()).count();
            if faithful > 0 && faithful < idx.len() {
                return Ok(idx);
            }
        }
        Err(EvalError::SingleClass)
    }

    /// AUC of `scores` on every round's subsample.
    pub fn resampled_auc(
        &self,
        scores: &[f64],
        labels: &[FaithfulLabel],
    ) -> Result<Vec<f64>, EvalError> {
        self.validate()?;
        if scores.len() != labels.len() {
            return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
        }
        roc_auc(scores, labels)?;
        (0..self.rounds)
            .into_par_iter()
            .map(|round| {
                let idx = self.draw(round, labels)?;
                let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
                let l: Vec<FaithfulLabel> = idx.iter().map(|&i| labels[i]).collect();
                roc_auc(&s, &l)
            })
            .collect()
    }
}

/// Outcome of the paired t-test on per-round AUC differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Significance {
    Tested {
        t_statistic: f64,
        p_value: f64,
    },
    /// Every round gave the same AUC for both systems.
    ExactlyEqual,
    /// Every round gave the same non-zero difference; no variance to test.
    ConstantDifference {
        difference: f64,
    },
}

impl Significance {
    pub fn p_value(&self) -> Option<f64> {
        match self {
            Significance::Tested { p_value, .. } => Some(*p_value),
            _ => None,
        }
    }

    pub fn t_statistic(&self) -> Option<f64> {
        match self {
            Significance::Tested { t_statistic, .. } => Some(*t_statistic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapComparison {
    pub auc_a: Vec<f64>,
    pub auc_b: Vec<f64>,
    /// Mean of `auc_a - auc_b` over rounds.
    pub mean_difference: f64,
    pub significance: Significance,
}

/// Compare two systems on shared subsamples.
pub fn bootstrap_compare(
    scores_a: &[f64],
    scores_b: &[f64],
    labels: &[FaithfulLabel],
    config: &BootstrapConfig,
) -> Result<BootstrapComparison, EvalError> {
    if scores_a.len() != scores_b.len() {
        return Err(EvalError::LengthMismatch(scores_a.len(), scores_b.len()));
    }
    let auc_a = config.resampled_auc(scores_a, labels)?;
    let auc_b = config.resampled_auc(scores_b, labels)?;
    Ok(compare_samples(auc_a, auc_b))
}

/// Paired two-sided t-test over already resampled AUCs.
pub fn compare_samples(auc_a: Vec<f64>, auc_b: Vec<f64>) -> BootstrapComparison {
    let diffs: Vec<f64> = auc_a.iter().zip(&auc_b).map(|(a, b)| a - b).collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let significance = if diffs.iter().all(|&d| d == diffs[0]) {
        if diffs[0] == 0.0 {
            Significance::ExactlyEqual
        } else {
            Significance::ConstantDifference {
                difference: diffs[0],
            }
        }
    } else {
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let t = mean / (var / n).sqrt();
        let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("n >= 2 degrees of freedom");
        Significance::Tested {
            t_statistic: t,
            p_value: (2.0 * dist.sf(t.abs())).min(1.0),
        }
    };
    BootstrapComparison {
        auc_a,
        auc_b,
        mean_difference: mean,
        significance,
    }
}

/// Faithfulness status of one summary sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "errors", rename_all = "lowercase")]
pub enum SentenceStatus {
    Faithful,
    Unfaithful(BTreeSet<ErrorType>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub score: f64,
    pub status: SentenceStatus,
}

/// Equal-width score histograms over `[0, 1]`: one for faithful sentences,
/// one for all unfaithful sentences, and one per error type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub bins: usize,
    pub faithful: Vec<u64>,
    pub unfaithful: Vec<u64>,
    pub per_type: BTreeMap<ErrorType, Vec<u64>>,
}

impl ErrorHistogram {
    /// `(lower, upper)` edges of bin `i`.
    pub fn edges(&self, i: usize) -> (f64, f64) {
        (
            i as f64 / self.bins as f64,
            (i + 1) as f64 / self.bins as f64,
        )
    }

    /// CSV with one row per bin: edges, faithful, unfaithful, then one column per error type.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lower,bin_upper,faithful,unfaithful");
        for t in ErrorType::ALL {
            out.push(',');
            out.push_str(t.as_str());
        }
        out.push('\n');
        for i in 0..self.bins {
            let (lo, hi) = self.edges(i);
            out.push_str(&format!(
                "{lo},{hi},{},{}",
                self.faithful[i], self.unfaithful[i]
            ));
            for t in ErrorType::ALL {
                out.push_str(&format!(",{}", self.per_type[&t][i]));
            }
            out.push('\n');
        }
        out
    }
}

/// A sentence with several error types is counted once in each type's panel.
pub fn error_type_histogram(
    records: &[SentenceRecord],
    bins: usize,
) -> Result<ErrorHistogram, EvalError> {
    if bins < 2 {
        return Err(EvalError::InvalidSetting("at least two bins"));
    }
    let mut hist = ErrorHistogram {
        bins,
        faithful: vec![0; bins],
        unfaithful: vec![0; bins],
        per_type: ErrorType::ALL
            .into_iter()
            .map(|t| (t, vec![0; bins]))
            .collect(),
    };
    for r in records {
        if !(0.0..=1.0).contains(&r.score) {
            return Err(EvalError::ScoreOutOfRange(r.score));
        }
        let bin = ((r.score * bins as f64) as usize).min(bins - 1);
        match &r.status {
            SentenceStatus::Faithful => hist.faithful[bin] += 1,
            SentenceStatus::Unfaithful(types) => {
                hist.unfaithful[bin] += 1;
                for t in types {
                    hist.per_type.get_mut(t).expect("all types present")[bin] += 1;
                }
            }
        }
    }
    Ok(hist)
}

/// Mean and (population) standard deviation of a count series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

pub fn summarize_counts(counts: &[usize]) -> Option<CountSummary> {
    if counts.is_empty() {
        return None;
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    let var = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    Some(CountSummary {
        mean,
        std: var.sqrt(),
        n: counts.len(),
    })
}

pub const REPORT_SCHEMA: &str = "infuse-eval-report/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResult {
    pub system: String,
    pub auc: f64,
    pub bootstrap_auc: Vec<f64>,
    /// Document sentences per premise, over all scored (sub-)sentences.
    pub retrieved: Option<CountSummary>,
    pub scorer_stats: Option<ScorerStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub system_a: String,
    pub system_b: String,
    pub mean_difference: f64,
    pub significance: Significance,
}

/// Everything the evaluation step reports, serialized as versioned JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub examples: usize,
    pub bootstrap: BootstrapConfig,
    pub systems: Vec<SystemResult>,
    pub pairwise: Vec<PairwiseResult>,
    pub histograms: BTreeMap<String, ErrorHistogram>,
}

impl EvalReport {
    pub fn system(&self, id: &str) -> Option<&SystemResult> {
        self.systems.iter().find(|s| s.system == id)
    }

    pub fn pair(&self, a: &str, b: &str) -> Option<&PairwiseResult> {
        self.pairwise
            .iter()
            .find(|p| p.system_a == a && p.system_b == b)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text AUC, retrieval-size and p-value tables.
    pub fn render_tables(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>8} {:>16}\n",
            "system", "ROC-AUC", "k_avg ± std"
        ));
        for s in &self.systems {
            let k = s
                .retrieved
                .map(|k| format!("{:.2} ± {:.2}", k.mean, k.std))
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:<12} {:>8.2} {:>16}\n",
                s.system,
                100.0 * s.auc,
                k
            ));
        }
        if !self.pairwise.is_empty() {
            out.push_str("\npairwise (A vs B): mean AUC difference, p-value\n");
            for p in &self.pairwise {
                let sig = match p.significance {
                    Significance::Tested { p_value, .. } => format!("p = {p_value:.4}"),
                    Significance::ExactlyEqual => "exactly equal".into(),
                    Significance::ConstantDifference { .. } => "constant difference".into(),
                };
                out.push_str(&format!(
                    "{:<12} {:<12} {:>+8.4}  {}\n",
                    p.system_a, p.system_b, p.mean_difference, sig
                ));
            }
        }
        out
    }
}
