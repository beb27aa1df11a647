use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while constructing domain values or standardizing labels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("sentence text is empty after trimming")]
    EmptySentence,
    #[error("document has no sentences")]
    EmptyDocument,
    #[error("summary has no units")]
    EmptySummary,
    #[error("summary unit has no sub-sentences")]
    EmptyUnit,
    #[error("invalid NLI verdict ({entailment}, {neutral}, {contradiction}): {reason}")]
    InvalidVerdict {
        entailment: f64,
        neutral: f64,
        contradiction: f64,
        reason: &'static str,
    },
    #[error("unknown annotation scheme `{0}`")]
    UnknownScheme(String),
    #[error("Likert consistency score {0} outside 1..=5")]
    LikertOutOfRange(i64),
    #[error("annotator vote {0} is not 0 or 1")]
    InvalidVote(i64),
    #[error("empty vote list")]
    EmptyVotes,
    #[error("empty sentence label list")]
    EmptyLabels,
    #[error("sentence_labels has {got} entries but the summary has {expected} units")]
    LabelCountMismatch { expected: usize, got: usize },
    #[error("sentence_errors present on unit {0}, which is not labelled unfaithful")]
    ErrorsOnFaithfulUnit(usize),
    #[error("unknown error type `{0}`")]
    UnknownErrorType(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
}

/// Errors from NLI scorers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScorerError {
    /// Transport-level failure; retrying may succeed.
    #[error("scorer service unavailable: {0}")]
    Unavailable(String),
    /// The service answered, but not with something we can use.
    #[error("malformed scorer response: {0}")]
    Malformed(String),
    #[error("no table entry for premise {premise:?} / hypothesis {hypothesis:?}")]
    MissingEntry { premise: String, hypothesis: String },
    #[error("invalid request: {0}")]
    InvalidRequest(&'static str),
    #[error("empty batch")]
    EmptyBatch,
    #[error("scoring document sentence {sentence}: {source}")]
    Pair {
        sentence: usize,
        reverse: bool,
        #[source]
        source: Box<ScorerError>,
    },
}

impl ScorerError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ScorerError::Unavailable(_) => true,
            ScorerError::Pair { source, .. } => source.is_retryable(),
            _ => false,
        }
    }

    /// Attach the document-sentence position of the failing pair.
    pub(crate) fn at_pair(self, sentence: usize, reverse: bool) -> Self {
        ScorerError::Pair {
            sentence,
            reverse,
            source: Box::new(self),
        }
    }
}

/// Errors from algorithm preconditions.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgoError {
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("cannot aggregate an empty score list")]
    EmptyScores,
    #[error("retrieval size k must be at least 1")]
    ZeroK,
    #[error("token budget must be at least 1")]
    ZeroBudget,
}

/// Errors from meta-evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("ROC-AUC undefined: only one class present")]
    SingleClass,
    #[error("length mismatch: {0} scores vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("invalid bootstrap setting: {0}")]
    InvalidSetting(&'static str),
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
}

/// Errors from dataset ingestion.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: field `{field}`: {message}")]
    Schema {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate example id `{0}`")]
    DuplicateId(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
