//! Converters from benchmark release layouts to [`BenchmarkExample`]s.
//!
//! AggreFact-style CSV: header row with at least `id`, `dataset`, `doc`,
//! `summary`, `label` (1 = consistent, 0 = not). Other columns are ignored.
//! Both text columns are segmented.
//!
//! DiverSumm-style JSONL: one object per line with `id`, `dataset`,
//! `documents` (list of strings or sentence lists), `summary` (sentence list
//! or string), per-sentence `sentence_votes` (0/1 per annotator) or
//! `sentence_labels` (0/1), optional `error_types` per sentence and an
//! optional released `summary_label` (0/1).

use std::collections::BTreeSet;
use std::io::Read;

use log::warn;
use serde::Deserialize;

use super::{finish, segment, TextInput};
use crate::domain::{
    standardize_label, summary_label_from_sentences, AnnotationScheme, BenchmarkExample, Document,
    ErrorType, FaithfulLabel, RawAnnotation, Summary,
};
use crate::error::{DomainError, IngestError};

/// Converted examples plus ids whose released summary label disagreed with
/// the label derived from sentence annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Conversion {
    pub examples: Vec<BenchmarkExample>,
    pub mismatched: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DiverSummOptions {
    /// Drop examples whose summary-level and sentence-level labels disagree.
    pub exclude_mismatched: bool,
}

fn schema(line: usize, field: &str, message: impl ToString) -> IngestError {
    IngestError::Schema {
        line,
        field: field.to_owned(),
        message: message.to_string(),
    }
}

fn binary_label(v: i64, line: usize, field: &str) -> Result<FaithfulLabel, IngestError> {
    match v {
        1 => Ok(FaithfulLabel::Faithful),
        0 => Ok(FaithfulLabel::Unfaithful),
        other => Err(schema(line, field, format!("expected 0 or 1, got {other}"))),
    }
}

#[derive(Debug, Deserialize)]
struct AggreFactRow {
    id: String,
    dataset: String,
    doc: String,
    summary: String,
    label: i64,
}

/// Read an AggreFact-style CSV. Line numbers in errors count the header as 1.
pub fn convert_aggrefact_csv<R: Read>(reader: R) -> Result<Conversion, IngestError> {
    let mut csv = csv::Reader::from_reader(reader);
    let mut examples = Vec::new();
    for row in csv.deserialize::<AggreFactRow>() {
        let row = row?;
        let line = examples.len() + 2;
        let domain = |field: &str, e: DomainError| schema(line, field, e);
        let label = binary_label(row.label, line, "label")?;
        let document = Document::from_texts(segment(&row.doc)).map_err(|e| domain("doc", e))?;
        let summary =
            Summary::from_texts(segment(&row.summary)).map_err(|e| domain("summary", e))?;
        examples.push(BenchmarkExample::new(
            row.id,
            row.dataset,
            document,
            summary,
            label,
        ));
    }
    Ok(Conversion {
        examples: finish(examples)?,
        mismatched: Vec::new(),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiverSummRecord {
    id: String,
    dataset: String,
    documents: Vec<TextInput>,
    summary: TextInput,
    #[serde(default)]
    sentence_votes: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    sentence_labels: Option<Vec<i64>>,
    #[serde(default)]
    error_types: Option<Vec<Vec<String>>>,
    #[serde(default)]
    summary_label: Option<i64>,
}

/// Read DiverSumm-style JSONL. Sentence labels come from a strict majority
/// of annotator votes; the summary is faithful only if every sentence is.
/// A released `summary_label` that disagrees is reported in
/// [`Conversion::mismatched`] and logged; the derived label is kept unless
/// `exclude_mismatched` drops the example.
pub fn convert_diversumm(text: &str, opts: DiverSummOptions) -> Result<Conversion, IngestError> {
    let mut examples = Vec::new();
    let mut mismatched = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: DiverSummRecord = serde_json::from_str(raw).map_err(|e| IngestError::Parse {
            line,
            message: e.to_string(),
        })?;
        let domain = |field: &str, e: DomainError| schema(line, field, e);

        let sources: Vec<Vec<String>> = rec.documents.iter().map(TextInput::sentences).collect();
        let document = Document::from_sources(&sources).map_err(|e| domain("documents", e))?;
        let summary =
            Summary::from_texts(rec.summary.sentences()).map_err(|e| domain("summary", e))?;

        let labels: Vec<FaithfulLabel> = match (&rec.sentence_votes, &rec.sentence_labels) {
            (Some(votes), None) => votes
                .iter()
                .map(|v| {
                    standardize_label(&RawAnnotation::Votes(v.clone()), AnnotationScheme::Majority)
                })
                .collect::<Result<_, _>>()
                .map_err(|e| domain("sentence_votes", e))?,
            (None, Some(labels)) => labels
                .iter()
                .map(|&v| binary_label(v, line, "sentence_labels"))
                .collect::<Result<_, _>>()?,
            _ => {
                return Err(schema(
                    line,
                    "sentence_votes",
                    "give exactly one of sentence_votes, sentence_labels",
                ))
            }
        };
        let derived =
            summary_label_from_sentences(&labels).map_err(|e| domain("sentence_labels", e))?;

        let errors = match rec.error_types {
            None => None,
            Some(lists) if lists.len() != labels.len() => {
                return Err(domain(
                    "error_types",
                    DomainError::LabelCountMismatch {
                        expected: labels.len(),
                        got: lists.len(),
                    },
                ))
            }
            Some(lists) => Some(
                lists
                    .iter()
                    .zip(&labels)
                    .map(|(list, label)| {
                        let set = list
                            .iter()
                            .map(|s| s.parse::<ErrorType>())
                            .collect::<Result<BTreeSet<_>, _>>()
                            .map_err(|e| domain("error_types", e))?;
                        // Tags on a sentence the majority judged faithful are dropped.
                        Ok(if label.is_faithful() {
                            BTreeSet::new()
                        } else {
                            set
                        })
                    })
                    .collect::<Result<Vec<_>, IngestError>>()?,
            ),
        };

        if let Some(released) = rec.summary_label {
            let released = binary_label(released, line, "summary_label")?;
            if released != derived {
                warn!(
                    "{}: summary label {} disagrees with sentence labels ({})",
                    rec.id,
                    released.as_str(),
                    derived.as_str()
                );
                mismatched.push(rec.id.clone());
                if opts.exclude_mismatched {
                    continue;
                }
            }
        }

        let field = if labels.len() == summary.len() {
            "error_types"
        } else {
            "sentence_labels"
        };
        let example = BenchmarkExample::new(rec.id, rec.dataset, document, summary, derived)
            .with_sentence_annotations(labels, errors)
            .map_err(|e| domain(field, e))?;
        examples.push(example);
    }
    mismatched.sort();
    Ok(Conversion {
        examples: finish(examples)?,
        mismatched,
    })
}
