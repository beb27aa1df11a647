//! Sentence- and summary-level faithfulness scoring methods.

pub mod aggregate;
pub mod baselines;
pub mod infuse;
pub mod matrix;

use serde::{Deserialize, Serialize};

use crate::error::AlgoError;

pub use aggregate::{aggregate_subsentences, aggregate_summary, Aggregator};
pub use baselines::{
    chunk_document, fulldoc, fulldoc_sentence, sentli, summac_zs, SENTLI_DEFAULT_K,
};
pub use infuse::{assemble_premise, infuse_k, infuse_sentence, RetrievalTrace, StopReason};
pub use matrix::{build_column, build_matrix, rank_sentences, EntailmentColumn, EntailmentMatrix};

/// Default premise and chunk budget, in whitespace tokens.
pub const DEFAULT_TOKEN_BUDGET: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    /// Fixed retrieval size for the fixed-k methods.
    pub fixed_k: Option<usize>,
    pub max_premise_tokens: usize,
    /// Add reverse-direction entailment to the ranking key.
    pub use_reverse: bool,
    /// Chunk size for whole-document scoring.
    pub chunk_budget: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            fixed_k: None,
            max_premise_tokens: DEFAULT_TOKEN_BUDGET,
            use_reverse: true,
            chunk_budget: DEFAULT_TOKEN_BUDGET,
        }
    }
}

impl RetrievalConfig {
    pub fn without_reverse(mut self) -> Self {
        self.use_reverse = false;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.fixed_k = Some(k);
        self
    }

    pub fn validate(&self) -> Result<(), AlgoError> {
        if self.fixed_k == Some(0) {
            return Err(AlgoError::ZeroK);
        }
        if self.max_premise_tokens == 0 || self.chunk_budget == 0 {
            return Err(AlgoError::ZeroBudget);
        }
        Ok(())
    }
}
