//! Incremental premise retrieval with neutral-minimum stopping.
//!
//! Document sentences are ranked by re-weighted entailment against the
//! summary sentence and admitted into the premise one at a time. After each
//! admission the whole premise is scored against the sentence; expansion stops
//! as soon as the neutral probability fails to drop, and the verdict of the
//! previous step is kept.

use serde::{Deserialize, Serialize};

use crate::domain::{Document, Sentence};
use crate::error::AlgoError;
use crate::scorer::{NliScorer, ScoreRequest};

use super::matrix::{build_column, rank_sentences, EntailmentColumn};
use super::RetrievalConfig;

/// Neutral probability assigned to the empty premise.
pub const INITIAL_NEUTRAL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The neutral probability did not decrease at the last step.
    NeutralIncrease,
    /// Every document sentence was admitted.
    Exhausted,
    /// Admitting the next sentence would exceed the premise token budget.
    TokenBudget,
}

/// What one retrieval run did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalTrace {
    /// Document-sentence indices, best first.
    pub ranked_indices: Vec<usize>,
    /// Number of ranked sentences in the returned premise.
    pub selected_count: usize,
    /// Neutral probability after each executed step.
    pub neutral_sequence: Vec<f64>,
    /// Entailment after each executed step.
    pub entailment_sequence: Vec<f64>,
    pub final_entailment: f64,
    pub stop_reason: StopReason,
}

impl RetrievalTrace {
    pub fn steps(&self) -> usize {
        self.neutral_sequence.len()
    }

    pub fn selected_indices(&self) -> &[usize] {
        &self.ranked_indices[..self.selected_count]
    }
}

/// Join document sentences in the given order with single spaces.
pub fn assemble_premise(doc: &Document, indices: &[usize]) -> String {
    let sentences = doc.sentences();
    indices
        .iter()
        .map(|&i| sentences[i].text())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Score `hypothesis` against the smallest ranked premise that minimizes the
/// neutral probability.
pub fn infuse_sentence<S: NliScorer + ?Sized>(
    doc: &Document,
    hypothesis: &Sentence,
    scorer: &S,
    config: &RetrievalConfig,
) -> Result<(f64, RetrievalTrace), AlgoError> {
    config.validate()?;
    let column = build_column(doc, hypothesis, scorer, config.use_reverse)?;
    expand(doc, hypothesis, scorer, config, &column)
}

/// The expansion loop, given an already built column.
pub fn expand<S: NliScorer + ?Sized>(
    doc: &Document,
    hypothesis: &Sentence,
    scorer: &S,
    config: &RetrievalConfig,
    column: &EntailmentColumn,
) -> Result<(f64, RetrievalTrace), AlgoError> {
    let ranked = rank_sentences(&column.reweighted);
    let sentences = doc.sentences();

    let mut premise = String::new();
    let mut tokens = 0usize;
    let mut prev_neutral = INITIAL_NEUTRAL;
    let mut prev_entailment = 0.0;
    let mut neutral_sequence = Vec::with_capacity(ranked.len());
    let mut entailment_sequence = Vec::with_capacity(ranked.len());
    let mut stop = StopReason::Exhausted;

    for (step, &m) in ranked.iter().enumerate() {
        let sentence = &sentences[m];
        // The first ranked sentence is always admitted.
        if step > 0 && tokens + sentence.token_count() > config.max_premise_tokens {
            stop = StopReason::TokenBudget;
            break;
        }
        if step > 0 {
            premise.push(' ');
        }
        premise.push_str(sentence.text());
        tokens += sentence.token_count();

        let verdict = scorer.score(&ScoreRequest::new(premise.as_str(), hypothesis.text())?)?;
        neutral_sequence.push(verdict.neutral);
        entailment_sequence.push(verdict.entailment);
        if step > 0 && verdict.neutral >= prev_neutral {
            stop = StopReason::NeutralIncrease;
            break;
        }
        prev_neutral = verdict.neutral;
        prev_entailment = verdict.entailment;
    }

    let selected_count = match stop {
        StopReason::NeutralIncrease => neutral_sequence.len() - 1,
        StopReason::TokenBudget | StopReason::Exhausted => neutral_sequence.len(),
    };
    let trace = RetrievalTrace {
        ranked_indices: ranked,
        selected_count,
        neutral_sequence,
        entailment_sequence,
        final_entailment: prev_entailment,
        stop_reason: stop,
    };
    Ok((prev_entailment, trace))
}

/// Fixed-size variant: score against the top `min(k, M)` ranked sentences.
/// Returns the entailment and the premise indices in rank order.
pub fn infuse_k<S: NliScorer + ?Sized>(
    doc: &Document,
    hypothesis: &Sentence,
    scorer: &S,
    k: usize,
    use_reverse: bool,
) -> Result<(f64, Vec<usize>), AlgoError> {
    if k == 0 {
        return Err(AlgoError::ZeroK);
    }
    let column = build_column(doc, hypothesis, scorer, use_reverse)?;
    let mut ranked = rank_sentences(&column.reweighted);
    ranked.truncate(k.min(doc.len()));
    let premise = assemble_premise(doc, &ranked);
    let verdict = scorer.score(&ScoreRequest::new(premise, hypothesis.text())?)?;
    Ok((verdict.entailment, ranked))
}
