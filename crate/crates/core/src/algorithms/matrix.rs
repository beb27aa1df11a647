use serde::Serialize;

use crate::domain::{Document, NliVerdict, Sentence};
use crate::error::ScorerError;
use crate::scorer::{NliScorer, ScoreRequest};

/// Sentence-level verdicts between every document sentence and one
/// hypothesis, plus the re-weighted ranking key.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntailmentColumn {
    /// `θ(d_m, s)` for each document sentence.
    pub forward: Vec<NliVerdict>,
    /// `θ(s, d_m)`; absent when reverse scoring is off.
    pub reverse: Option<Vec<NliVerdict>>,
    /// Forward plus reverse entailment, in `[0, 2]`.
    pub reweighted: Vec<f64>,
}

impl EntailmentColumn {
    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward_entailment(&self) -> Vec<f64> {
        self.forward.iter().map(|v| v.entailment).collect()
    }

    pub fn forward_contradiction(&self) -> Vec<f64> {
        self.forward.iter().map(|v| v.contradiction).collect()
    }
}

/// The full document × summary grid, one column per hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntailmentMatrix {
    pub columns: Vec<EntailmentColumn>,
}

impl EntailmentMatrix {
    /// `Ê[m][n]`.
    pub fn reweighted(&self, m: usize, n: usize) -> f64 {
        self.columns[n].reweighted[m]
    }
}

pub fn build_matrix<S: NliScorer + ?Sized>(
    doc: &Document,
    hypotheses: &[Sentence],
    scorer: &S,
    use_reverse: bool,
) -> Result<EntailmentMatrix, ScorerError> {
    let columns = hypotheses
        .iter()
        .map(|h| build_column(doc, h, scorer, use_reverse))
        .collect::<Result<_, _>>()?;
    Ok(EntailmentMatrix { columns })
}

/// Score every document sentence against `hypothesis` in one batch: `M`
/// forward pairs, then `M` reverse pairs when `use_reverse` is set.
pub fn build_column<S: NliScorer + ?Sized>(
    doc: &Document,
    hypothesis: &Sentence,
    scorer: &S,
    use_reverse: bool,
) -> Result<EntailmentColumn, ScorerError> {
    let m = doc.len();
    let mut reqs = Vec::with_capacity(if use_reverse { 2 * m } else { m });
    for d in doc.sentences() {
        reqs.push(ScoreRequest::new(d.text(), hypothesis.text())?);
    }
    if use_reverse {
        for d in doc.sentences() {
            reqs.push(ScoreRequest::new(hypothesis.text(), d.text())?);
        }
    }
    let mut verdicts = score_pairs(scorer, &reqs, m)?;
    let reverse = use_reverse.then(|| verdicts.split_off(m));
    let forward = verdicts;
    let reweighted = match &reverse {
        Some(rev) => forward
            .iter()
            .zip(rev)
            .map(|(f, r)| f.entailment + r.entailment)
            .collect(),
        None => forward.iter().map(|f| f.entailment).collect(),
    };
    Ok(EntailmentColumn {
        forward,
        reverse,
        reweighted,
    })
}

/// Forward entailment/contradiction only (`M` calls).
pub fn forward_column<S: NliScorer + ?Sized>(
    doc: &Document,
    hypothesis: &Sentence,
    scorer: &S,
) -> Result<Vec<NliVerdict>, ScorerError> {
    build_column(doc, hypothesis, scorer, false).map(|c| c.forward)
}

/// Batch-score `reqs`; on a non-transient failure, find the offending pair so
/// the error names it. Requests `0..m` are forward pairs, the rest reverse.
fn score_pairs<S: NliScorer + ?Sized>(
    scorer: &S,
    reqs: &[ScoreRequest],
    m: usize,
) -> Result<Vec<NliVerdict>, ScorerError> {
    match scorer.score_batch(reqs) {
        Ok(v) => Ok(v),
        Err(e) if e.is_retryable() => Err(e),
        Err(e) => {
            for (i, r) in reqs.iter().enumerate() {
                if let Err(inner) = scorer.score(r) {
                    return Err(inner.at_pair(i % m, i >= m));
                }
            }
            Err(e)
        }
    }
}

/// Document-sentence indices by score, highest first; ties go to the smaller index.
pub fn rank_sentences(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}
