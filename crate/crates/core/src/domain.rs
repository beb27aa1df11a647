//! Domain types shared across the crate and label standardization.
//!
//! Everything here is an immutable value; constructors validate their
//! invariants and reject bad input instead of repairing it.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

/// Tolerance on the sum of a verdict's three probabilities.
pub const VERDICT_SUM_TOLERANCE: f64 = 1e-4;

/// A sentence of a document or summary.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sentence {
    index: usize,
    text: String,
    token_count: usize,
}

impl Sentence {
    /// The text is trimmed; whitespace-only text is rejected.
    pub fn new(index: usize, text: impl AsRef<str>) -> Result<Self, DomainError> {
        let text = text.as_ref().trim();
        if text.is_empty() {
            return Err(DomainError::EmptySentence);
        }
        Ok(Self {
            index,
            token_count: whitespace_tokens(text),
            text: text.to_owned(),
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub(crate) fn reindexed(&self, index: usize) -> Self {
        Self {
            index,
            ..self.clone()
        }
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

pub fn whitespace_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// A source document, possibly the concatenation of several sources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    sentences: Vec<Sentence>,
    /// Sentence count of each concatenated source, in order.
    source_lengths: Vec<usize>,
}

impl Document {
    pub fn from_texts<I, S>(texts: I) -> Result<Self, DomainError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let sentences = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| Sentence::new(i, t))
            .collect::<Result<Vec<_>, _>>()?;
        let n = sentences.len();
        Self::with_sources(sentences, vec![n])
    }

    /// Concatenate several pre-segmented sources into one document.
    pub fn from_sources<S: AsRef<str>>(sources: &[Vec<S>]) -> Result<Self, DomainError> {
        let mut sentences = Vec::new();
        let mut lengths = Vec::with_capacity(sources.len());
        for source in sources {
            lengths.push(source.len());
            for text in source {
                sentences.push(Sentence::new(sentences.len(), text)?);
            }
        }
        Self::with_sources(sentences, lengths)
    }

    fn with_sources(
        sentences: Vec<Sentence>,
        source_lengths: Vec<usize>,
    ) -> Result<Self, DomainError> {
        if sentences.is_empty() || source_lengths.contains(&0) {
            return Err(DomainError::EmptyDocument);
        }
        let sentences = sentences
            .into_iter()
            .enumerate()
            .map(|(i, s)| if s.index == i { s } else { s.reindexed(i) })
            .collect();
        Ok(Self {
            sentences,
            source_lengths,
        })
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn source_count(&self) -> usize {
        self.source_lengths.len()
    }

    pub fn source_lengths(&self) -> &[usize] {
        &self.source_lengths
    }

    /// Sentences grouped back into their original sources.
    pub fn sources(&self) -> Vec<&[Sentence]> {
        let mut out = Vec::with_capacity(self.source_lengths.len());
        let mut start = 0;
        for &n in &self.source_lengths {
            out.push(&self.sentences[start..start + n]);
            start += n;
        }
        out
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::token_count).sum()
    }
}

/// One summary sentence together with its simplified sub-sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryUnit {
    sentence: Sentence,
    sub_sentences: Vec<Sentence>,
}

impl SummaryUnit {
    pub fn new(sentence: Sentence) -> Self {
        Self {
            sub_sentences: vec![sentence.clone()],
            sentence,
        }
    }

    pub fn with_parts(sentence: Sentence, parts: Vec<Sentence>) -> Result<Self, DomainError> {
        if parts.is_empty() {
            return Err(DomainError::EmptyUnit);
        }
        Ok(Self {
            sentence,
            sub_sentences: parts,
        })
    }

    pub fn sentence(&self) -> &Sentence {
        &self.sentence
    }

    pub fn sub_sentences(&self) -> &[Sentence] {
        &self.sub_sentences
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    units: Vec<SummaryUnit>,
}

impl Summary {
    pub fn new(units: Vec<SummaryUnit>) -> Result<Self, DomainError> {
        if units.is_empty() {
            return Err(DomainError::EmptySummary);
        }
        Ok(Self { units })
    }

    pub fn from_texts<I, S>(texts: I) -> Result<Self, DomainError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let units = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| Sentence::new(i, t).map(SummaryUnit::new))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(units)
    }

    pub fn units(&self) -> &[SummaryUnit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.units.iter().map(SummaryUnit::sentence)
    }

    pub fn token_count(&self) -> usize {
        self.sentences().map(Sentence::token_count).sum()
    }
}

/// Probabilities for (entailment, neutral, contradiction) from one scorer call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NliVerdict {
    pub entailment: f64,
    pub neutral: f64,
    pub contradiction: f64,
}

impl NliVerdict {
    pub fn new(entailment: f64, neutral: f64, contradiction: f64) -> Result<Self, DomainError> {
        let invalid = |reason| DomainError::InvalidVerdict {
            entailment,
            neutral,
            contradiction,
            reason,
        };
        for p in [entailment, neutral, contradiction] {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(invalid("probability outside [0, 1]"));
            }
        }
        let sum = entailment + neutral + contradiction;
        if (sum - 1.0).abs() > VERDICT_SUM_TOLERANCE {
            return Err(invalid("probabilities do not sum to 1"));
        }
        Ok(Self {
            entailment,
            neutral,
            contradiction,
        })
    }
}

impl<'de> Deserialize<'de> for NliVerdict {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            entailment: f64,
            neutral: f64,
            contradiction: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        NliVerdict::new(raw.entailment, raw.neutral, raw.contradiction)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaithfulLabel {
    Faithful,
    Unfaithful,
}

impl FaithfulLabel {
    pub fn is_faithful(self) -> bool {
        self == FaithfulLabel::Faithful
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FaithfulLabel::Faithful => "faithful",
            FaithfulLabel::Unfaithful => "unfaithful",
        }
    }
}

impl FromStr for FaithfulLabel {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "faithful" => Ok(FaithfulLabel::Faithful),
            "unfaithful" => Ok(FaithfulLabel::Unfaithful),
            other => Err(DomainError::UnknownLabel(other.to_owned())),
        }
    }
}

/// Fine-grained unfaithfulness categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorType {
    PredE,
    EntE,
    CircE,
    CorefE,
    LinkE,
    OutE,
    GramE,
}

impl ErrorType {
    pub const ALL: [ErrorType; 7] = [
        ErrorType::PredE,
        ErrorType::EntE,
        ErrorType::CircE,
        ErrorType::CorefE,
        ErrorType::LinkE,
        ErrorType::OutE,
        ErrorType::GramE,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorType::PredE => "PredE",
            ErrorType::EntE => "EntE",
            ErrorType::CircE => "CircE",
            ErrorType::CorefE => "CorefE",
            ErrorType::LinkE => "LinkE",
            ErrorType::OutE => "OutE",
            ErrorType::GramE => "GramE",
        }
    }
}

impl FromStr for ErrorType {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| DomainError::UnknownErrorType(s.to_owned()))
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One (document, summary, label) benchmark record.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkExample {
    pub id: String,
    pub dataset: String,
    pub document: Document,
    pub summary: Summary,
    pub label: FaithfulLabel,
    sentence_labels: Option<Vec<FaithfulLabel>>,
    sentence_errors: Option<Vec<BTreeSet<ErrorType>>>,
}

impl BenchmarkExample {
    pub fn new(
        id: impl Into<String>,
        dataset: impl Into<String>,
        document: Document,
        summary: Summary,
        label: FaithfulLabel,
    ) -> Self {
        Self {
            id: id.into(),
            dataset: dataset.into(),
            document,
            summary,
            label,
            sentence_labels: None,
            sentence_errors: None,
        }
    }

    /// Attach per-unit labels and (optionally) per-unit error sets.
    ///
    /// Error sets must be empty on units not labelled unfaithful.
    pub fn with_sentence_annotations(
        mut self,
        labels: Vec<FaithfulLabel>,
        errors: Option<Vec<BTreeSet<ErrorType>>>,
    ) -> Result<Self, DomainError> {
        let n = self.summary.len();
        if labels.len() != n {
            return Err(DomainError::LabelCountMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        if let Some(errors) = &errors {
            if errors.len() != n {
                return Err(DomainError::LabelCountMismatch {
                    expected: n,
                    got: errors.len(),
                });
            }
            for (i, (set, label)) in errors.iter().zip(&labels).enumerate() {
                if !set.is_empty() && label.is_faithful() {
                    return Err(DomainError::ErrorsOnFaithfulUnit(i));
                }
            }
        }
        self.sentence_labels = Some(labels);
        self.sentence_errors = errors;
        Ok(self)
    }

    pub fn sentence_labels(&self) -> Option<&[FaithfulLabel]> {
        self.sentence_labels.as_deref()
    }

    pub fn sentence_errors(&self) -> Option<&[BTreeSet<ErrorType>]> {
        self.sentence_errors.as_deref()
    }

    pub fn with_summary(mut self, summary: Summary) -> Self {
        debug_assert_eq!(summary.len(), self.summary.len());
        self.summary = summary;
        self
    }
}

/// How raw human annotations are encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationScheme {
    /// A single 1..=5 consistency score.
    Likert,
    /// Per-annotator 0/1 votes.
    Majority,
}

impl FromStr for AnnotationScheme {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "likert" => Ok(AnnotationScheme::Likert),
            "majority" => Ok(AnnotationScheme::Majority),
            _ => Err(DomainError::UnknownScheme(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawAnnotation {
    Likert(i64),
    Votes(Vec<i64>),
}

/// Map a raw annotation to a binary label.
///
/// Likert: faithful only at the top score of 5. Majority: faithful only when
/// strictly more than half of the votes are 1, so ties are unfaithful.
pub fn standardize_label(
    raw: &RawAnnotation,
    scheme: AnnotationScheme,
) -> Result<FaithfulLabel, DomainError> {
    match (scheme, raw) {
        (AnnotationScheme::Likert, RawAnnotation::Likert(score)) => {
            if !(1..=5).contains(score) {
                return Err(DomainError::LikertOutOfRange(*score));
            }
            Ok(if *score == 5 {
                FaithfulLabel::Faithful
            } else {
                FaithfulLabel::Unfaithful
            })
        }
        (AnnotationScheme::Majority, RawAnnotation::Votes(votes)) => {
            if votes.is_empty() {
                return Err(DomainError::EmptyVotes);
            }
            if let Some(&bad) = votes.iter().find(|&&v| v != 0 && v != 1) {
                return Err(DomainError::InvalidVote(bad));
            }
            let yes = votes.iter().filter(|&&v| v == 1).count();
            Ok(if 2 * yes > votes.len() {
                FaithfulLabel::Faithful
            } else {
                FaithfulLabel::Unfaithful
            })
        }
        (AnnotationScheme::Likert, RawAnnotation::Votes(_)) => Err(DomainError::UnknownScheme(
            "likert scheme given vote list".into(),
        )),
        (AnnotationScheme::Majority, RawAnnotation::Likert(_)) => Err(DomainError::UnknownScheme(
            "majority scheme given Likert score".into(),
        )),
    }
}

/// A summary is faithful only if every one of its sentences is.
pub fn summary_label_from_sentences(
    labels: &[FaithfulLabel],
) -> Result<FaithfulLabel, DomainError> {
    if labels.is_empty() {
        return Err(DomainError::EmptyLabels);
    }
    Ok(if labels.iter().all(|l| l.is_faithful()) {
        FaithfulLabel::Faithful
    } else {
        FaithfulLabel::Unfaithful
    })
}
