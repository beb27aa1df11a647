//! Comparison methods: whole-document chunking, best single sentence, and
//! fixed-size entailment/contradiction retrieval.

use crate::domain::{Document, Sentence, Summary};
use crate::error::AlgoError;
use crate::scorer::{NliScorer, ScoreRequest};

use super::aggregate::{aggregate_summary, mean};
use super::infuse::assemble_premise;
use super::matrix::{forward_column, rank_sentences};

/// Default per-list retrieval size for [`sentli`].
pub const SENTLI_DEFAULT_K: usize = 5;

/// Best single document sentence by forward entailment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroShotScore {
    pub score: f64,
    pub argmax: usize,
}

/// Max forward entailment over all document sentences; no sentence is
/// filtered out by length or position.
pub fn summac_zs<S: NliScorer + ?Sized>(
    doc: &Document,
    hypothesis: &Sentence,
    scorer: &S,
) -> Result<ZeroShotScore, AlgoError> {
    let forward = forward_column(doc, hypothesis, scorer)?;
    let entailment: Vec<f64> = forward.iter().map(|v| v.entailment).collect();
    let argmax = rank_sentences(&entailment)[0];
    Ok(ZeroShotScore {
        score: entailment[argmax],
        argmax,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextScore {
    pub score: f64,
    /// Premise sentences in document order.
    pub context: Vec<usize>,
}

/// Context = top-`k` sentences by forward entailment together with the
/// top-`k` by forward contradiction, deduplicated and kept in document order.
pub fn sentli<S: NliScorer + ?Sized>(
    doc: &Document,
    hypothesis: &Sentence,
    scorer: &S,
    k: usize,
) -> Result<ContextScore, AlgoError> {
    if k == 0 {
        return Err(AlgoError::ZeroK);
    }
    let forward = forward_column(doc, hypothesis, scorer)?;
    let entailment: Vec<f64> = forward.iter().map(|v| v.entailment).collect();
    let contradiction: Vec<f64> = forward.iter().map(|v| v.contradiction).collect();
    let mut context: Vec<usize> = rank_sentences(&entailment)
        .into_iter()
        .take(k)
        .chain(rank_sentences(&contradiction).into_iter().take(k))
        .collect();
    context.sort_unstable();
    context.dedup();
    let premise = assemble_premise(doc, &context);
    let verdict = scorer.score(&ScoreRequest::new(premise, hypothesis.text())?)?;
    Ok(ContextScore {
        score: verdict.entailment,
        context,
    })
}

/// Split a document into consecutive sentence-aligned chunks of at most
/// `budget` whitespace tokens. A sentence longer than the budget becomes a
/// chunk of its own.
pub fn chunk_document(doc: &Document, budget: usize) -> Result<Vec<Vec<usize>>, AlgoError> {
    if budget == 0 {
        return Err(AlgoError::ZeroBudget);
    }
    let mut chunks: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    let mut tokens = 0;
    for s in doc.sentences() {
        if !current.is_empty() && tokens + s.token_count() > budget {
            chunks.push(std::mem::take(&mut current));
            tokens = 0;
        }
        current.push(s.index());
        tokens += s.token_count();
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    Ok(chunks)
}

/// Per-sentence and pooled scores of one summary.
#[derive(Debug, Clone, PartialEq)]
pub struct FullDocScore {
    pub summary_score: f64,
    pub sentence_scores: Vec<f64>,
    pub chunk_count: usize,
}

/// Entailment of one summary sentence averaged over document chunks.
pub fn fulldoc_sentence<S: NliScorer + ?Sized>(
    doc: &Document,
    chunks: &[Vec<usize>],
    hypothesis: &Sentence,
    scorer: &S,
) -> Result<f64, AlgoError> {
    let reqs = chunks
        .iter()
        .map(|c| ScoreRequest::new(assemble_premise(doc, c), hypothesis.text()))
        .collect::<Result<Vec<_>, _>>()?;
    let scores: Vec<f64> = scorer
        .score_batch(&reqs)?
        .iter()
        .map(|v| v.entailment)
        .collect();
    mean(&scores).ok_or(AlgoError::EmptyScores)
}

/// Whole-document scoring: each summary sentence against every chunk,
/// averaged over chunks, then mean-pooled over sentences.
pub fn fulldoc<S: NliScorer + ?Sized>(
    doc: &Document,
    summary: &Summary,
    scorer: &S,
    chunk_budget: usize,
) -> Result<FullDocScore, AlgoError> {
    let chunks = chunk_document(doc, chunk_budget)?;
    let sentence_scores = summary
        .sentences()
        .map(|s| fulldoc_sentence(doc, &chunks, s, scorer))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FullDocScore {
        summary_score: aggregate_summary(&sentence_scores)?,
        sentence_scores,
        chunk_count: chunks.len(),
    })
}
