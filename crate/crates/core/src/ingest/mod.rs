//! Dataset loading and the canonical JSON-lines record format.
//!
//! One JSON object per line:
//!
//! ```text
//! {"id":"x1","dataset":"toy","documents":[["S1.","S2."]],"summary":["S1."],"label":"faithful"}
//! ```
//!
//! `documents` entries and `summary` are either a raw string (segmented on
//! load) or a list of sentences (taken verbatim). The summary label comes
//! from exactly one of `label`, `consistency` (Likert 1..=5) or
//! `annotator_votes` (0/1 per annotator); when none is given it is derived
//! from `sentence_labels`.

pub mod convert;
mod segment;

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::domain::{
    standardize_label, summary_label_from_sentences, AnnotationScheme, BenchmarkExample, Document,
    ErrorType, FaithfulLabel, RawAnnotation, Summary,
};
use crate::error::{DomainError, IngestError};

pub use convert::{convert_aggrefact_csv, convert_diversumm, Conversion, DiverSummOptions};
pub use segment::segment;

/// Version tag of the canonical record layout.
pub const CANONICAL_VERSION: &str = "infuse-canonical/v1";

const FIELDS: &[&str] = &[
    "id",
    "dataset",
    "documents",
    "summary",
    "label",
    "consistency",
    "annotator_votes",
    "sentence_labels",
    "sentence_errors",
];

/// A raw string or an already segmented list of sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TextInput {
    Text(String),
    Sentences(Vec<String>),
}

impl TextInput {
    pub fn sentences(&self) -> Vec<String> {
        match self {
            TextInput::Text(text) => segment(text),
            TextInput::Sentences(list) => list.clone(),
        }
    }
}

/// File form of a [`BenchmarkExample`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalRecord {
    pub id: String,
    pub dataset: String,
    pub documents: Vec<TextInput>,
    pub summary: TextInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<FaithfulLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_votes: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence_labels: Option<Vec<FaithfulLabel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence_errors: Option<Vec<Vec<ErrorType>>>,
}

impl CanonicalRecord {
    /// Canonical form of an example: pre-segmented text, resolved label.
    pub fn from_example(example: &BenchmarkExample) -> Self {
        let documents = example
            .document
            .sources()
            .into_iter()
            .map(|source| {
                TextInput::Sentences(source.iter().map(|s| s.text().to_owned()).collect())
            })
            .collect();
        let summary = TextInput::Sentences(
            example
                .summary
                .sentences()
                .map(|s| s.text().to_owned())
                .collect(),
        );
        Self {
            id: example.id.clone(),
            dataset: example.dataset.clone(),
            documents,
            summary,
            label: Some(example.label),
            consistency: None,
            annotator_votes: None,
            sentence_labels: example.sentence_labels().map(<[_]>::to_vec),
            sentence_errors: example
                .sentence_errors()
                .map(|sets| sets.iter().map(|s| s.iter().copied().collect()).collect()),
        }
    }

    /// Validate and build the in-memory example. `line` is only used for
    /// error reporting.
    pub fn into_example(self, line: usize) -> Result<BenchmarkExample, IngestError> {
        let schema = |field: &str, err: DomainError| IngestError::Schema {
            line,
            field: field.to_owned(),
            message: err.to_string(),
        };
        if self.id.trim().is_empty() {
            return Err(schema_msg(line, "id", "must be non-empty"));
        }
        if self.documents.is_empty() {
            return Err(schema("documents", DomainError::EmptyDocument));
        }
        let sources: Vec<Vec<String>> = self.documents.iter().map(TextInput::sentences).collect();
        let document = Document::from_sources(&sources).map_err(|e| schema("documents", e))?;
        let summary =
            Summary::from_texts(self.summary.sentences()).map_err(|e| schema("summary", e))?;

        let sources_given = [
            self.label.is_some(),
            self.consistency.is_some(),
            self.annotator_votes.is_some(),
        ];
        if sources_given.iter().filter(|&&b| b).count() > 1 {
            return Err(schema_msg(
                line,
                "label",
                "give only one of label, consistency, annotator_votes",
            ));
        }
        let label = if let Some(label) = self.label {
            label
        } else if let Some(score) = self.consistency {
            standardize_label(&RawAnnotation::Likert(score), AnnotationScheme::Likert)
                .map_err(|e| schema("consistency", e))?
        } else if let Some(votes) = &self.annotator_votes {
            standardize_label(
                &RawAnnotation::Votes(votes.clone()),
                AnnotationScheme::Majority,
            )
            .map_err(|e| schema("annotator_votes", e))?
        } else if let Some(labels) = &self.sentence_labels {
            summary_label_from_sentences(labels).map_err(|e| schema("sentence_labels", e))?
        } else {
            return Err(schema_msg(line, "label", "missing; no label source given"));
        };

        let mut example = BenchmarkExample::new(self.id, self.dataset, document, summary, label);
        match (self.sentence_labels, self.sentence_errors) {
            (None, None) => {}
            (None, Some(_)) => {
                return Err(schema_msg(
                    line,
                    "sentence_errors",
                    "requires sentence_labels",
                ))
            }
            (Some(labels), errors) => {
                let field = if labels.len() == example.summary.len() {
                    "sentence_errors"
                } else {
                    "sentence_labels"
                };
                let errors = errors.map(|lists| {
                    lists
                        .into_iter()
                        .map(|l| l.into_iter().collect::<BTreeSet<_>>())
                        .collect::<Vec<_>>()
                });
                example = example
                    .with_sentence_annotations(labels, errors)
                    .map_err(|e| schema(field, e))?;
            }
        }
        Ok(example)
    }

    /// Compact single-line JSON, fields in declaration order.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("canonical record serializes")
    }
}

fn schema_msg(line: usize, field: &str, message: &str) -> IngestError {
    IngestError::Schema {
        line,
        field: field.to_owned(),
        message: message.to_owned(),
    }
}

fn take_field<T: DeserializeOwned>(
    obj: &mut Map<String, Value>,
    name: &str,
    line: usize,
) -> Result<Option<T>, IngestError> {
    match obj.remove(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v)
            .map(Some)
            .map_err(|e| IngestError::Schema {
                line,
                field: name.to_owned(),
                message: e.to_string(),
            }),
    }
}

fn required<T: DeserializeOwned>(
    obj: &mut Map<String, Value>,
    name: &str,
    line: usize,
) -> Result<T, IngestError> {
    take_field(obj, name, line)?.ok_or_else(|| schema_msg(line, name, "missing"))
}

/// Parse one canonical line. `line` is 1-based.
pub fn parse_record(text: &str, line: usize) -> Result<CanonicalRecord, IngestError> {
    let value: Value = serde_json::from_str(text).map_err(|e| IngestError::Parse {
        line,
        message: e.to_string(),
    })?;
    let Value::Object(mut obj) = value else {
        return Err(IngestError::Parse {
            line,
            message: "expected a JSON object".into(),
        });
    };
    if let Some(unknown) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(schema_msg(line, unknown, "unknown field"));
    }
    Ok(CanonicalRecord {
        id: required(&mut obj, "id", line)?,
        dataset: required(&mut obj, "dataset", line)?,
        documents: required(&mut obj, "documents", line)?,
        summary: required(&mut obj, "summary", line)?,
        label: take_field(&mut obj, "label", line)?,
        consistency: take_field(&mut obj, "consistency", line)?,
        annotator_votes: take_field(&mut obj, "annotator_votes", line)?,
        sentence_labels: take_field(&mut obj, "sentence_labels", line)?,
        sentence_errors: take_field(&mut obj, "sentence_errors", line)?,
    })
}

/// Parse a whole canonical JSONL text. Blank lines are skipped. Any bad
/// record fails the whole load. Output is sorted by id.
pub fn read_canonical(text: &str) -> Result<Vec<BenchmarkExample>, IngestError> {
    let mut examples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        examples.push(parse_record(raw, i + 1)?.into_example(i + 1)?);
    }
    finish(examples)
}

/// Sort by id and reject duplicates.
pub(crate) fn finish(
    mut examples: Vec<BenchmarkExample>,
) -> Result<Vec<BenchmarkExample>, IngestError> {
    let mut seen = HashSet::new();
    for ex in &examples {
        if !seen.insert(ex.id.as_str()) {
            return Err(IngestError::DuplicateId(ex.id.clone()));
        }
    }
    examples.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(examples)
}

/// Serialize examples as canonical JSONL, one line each, newline terminated.
pub fn write_canonical(examples: &[BenchmarkExample]) -> String {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&CanonicalRecord::from_example(ex).to_line());
        out.push('\n');
    }
    out
}

/// Source file layouts understood by [`load_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Canonical,
    AggreFactCsv,
    DiverSumm(DiverSummOptions),
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "canonical" | "jsonl" => Ok(DatasetFormat::Canonical),
            "aggrefact" | "aggrefact-csv" => Ok(DatasetFormat::AggreFactCsv),
            "diversumm" => Ok(DatasetFormat::DiverSumm(DiverSummOptions::default())),
            other => Err(format!("unknown dataset format `{other}`")),
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Load and validate a dataset file.
pub fn load_dataset(
    path: impl AsRef<Path>,
    format: DatasetFormat,
) -> Result<Vec<BenchmarkExample>, IngestError> {
    let path = path.as_ref();
    let text = read_file(path)?;
    match format {
        DatasetFormat::Canonical => read_canonical(&text),
        DatasetFormat::AggreFactCsv => convert_aggrefact_csv(text.as_bytes()).map(|c| c.examples),
        DatasetFormat::DiverSumm(opts) => convert_diversumm(&text, opts).map(|c| c.examples),
    }
}
