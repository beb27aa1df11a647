use std::collections::HashSet;

use crate::domain::NliVerdict;
use crate::error::ScorerError;
use crate::text::{has_negation_cue, word_tokens};

use super::{NliScorer, ScoreRequest};

/// Deterministic token-overlap stand-in for an NLI model.
///
/// With `r` the fraction of distinct hypothesis tokens found in the premise
/// and `neg` set when exactly one side carries a negation cue:
/// entailment `0.9·r`, contradiction `0.9·(1−r)·neg`, and neutral the rest.
/// Neutral is computed as `0.1 + 0.9·(1−r)·(1−neg)`, which is the same
/// quantity but never rounds below 0.1.
#[derive(Debug, Clone, Default)]
pub struct LexicalScorer;

pub const LEXICAL_SCORER_ID: &str = "lexical-v1";

impl LexicalScorer {
    pub fn new() -> Self {
        Self
    }

    pub fn verdict(premise: &str, hypothesis: &str) -> NliVerdict {
        let premise_tokens: HashSet<String> = word_tokens(premise).into_iter().collect();
        let hypothesis_tokens: HashSet<String> = word_tokens(hypothesis).into_iter().collect();
        let overlap = if hypothesis_tokens.is_empty() {
            0.0
        } else {
            let shared = hypothesis_tokens.intersection(&premise_tokens).count();
            shared as f64 / hypothesis_tokens.len() as f64
        };
        let neg = if has_negation_cue(premise) != has_negation_cue(hypothesis) {
            1.0
        } else {
            0.0
        };
        let entailment = 0.9 * overlap;
        let contradiction = 0.9 * (1.0 - overlap) * neg;
        let neutral = 0.1 + 0.9 * (1.0 - overlap) * (1.0 - neg);
        NliVerdict::new(entailment, neutral, contradiction)
            .expect("lexical verdict is a valid distribution")
    }
}

impl NliScorer for LexicalScorer {
    fn id(&self) -> &str {
        LEXICAL_SCORER_ID
    }

    fn score(&self, req: &ScoreRequest) -> Result<NliVerdict, ScorerError> {
        Ok(Self::verdict(&req.premise, &req.hypothesis))
    }
}
