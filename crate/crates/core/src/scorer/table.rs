use std::collections::HashMap;

use crate::domain::NliVerdict;
use crate::error::ScorerError;

use super::{NliScorer, ScoreRequest};

/// A scorer backed by an explicit lookup table. Mostly for tests.
#[derive(Debug, Clone, Default)]
pub struct TableScorer {
    id: String,
    entries: HashMap<(String, String), NliVerdict>,
    fallback: Option<NliVerdict>,
}

impl TableScorer {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            ..Self::default()
        }
    }

    pub fn insert(
        &mut self,
        premise: impl Into<String>,
        hypothesis: impl Into<String>,
        verdict: NliVerdict,
    ) {
        self.entries
            .insert((premise.into(), hypothesis.into()), verdict);
    }

    pub fn with(mut self, premise: &str, hypothesis: &str, verdict: NliVerdict) -> Self {
        self.insert(premise, hypothesis, verdict);
        self
    }

    /// Answer unknown pairs with `verdict` instead of failing.
    pub fn with_fallback(mut self, verdict: NliVerdict) -> Self {
        self.fallback = Some(verdict);
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Load a table from JSON lines of `{"premise", "hypothesis", "entailment", "neutral", "contradiction"}`.
    pub fn from_jsonl(id: impl Into<String>, contents: &str) -> Result<Self, ScorerError> {
        #[derive(serde::Deserialize)]
        struct Row {
            premise: String,
            hypothesis: String,
            #[serde(flatten)]
            verdict: NliVerdict,
        }
        let mut table = Self::new(id);
        for (i, line) in contents.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(line)
                .map_err(|e| ScorerError::Malformed(format!("table line {}: {e}", i + 1)))?;
            table.insert(row.premise, row.hypothesis, row.verdict);
        }
        Ok(table)
    }
}

impl NliScorer for TableScorer {
    fn id(&self) -> &str {
        &self.id
    }

    fn score(&self, req: &ScoreRequest) -> Result<NliVerdict, ScorerError> {
        self.entries
            .get(&(req.premise.clone(), req.hypothesis.clone()))
            .copied()
            .or(self.fallback)
            .ok_or_else(|| ScorerError::MissingEntry {
                premise: req.premise.clone(),
                hypothesis: req.hypothesis.clone(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(e: f64, n: f64, c: f64) -> NliVerdict {
        NliVerdict::new(e, n, c).unwrap()
    }

    #[test]
    fn returns_injected_verdict() {
        let t = TableScorer::new("fake").with("p", "h", v(0.7, 0.2, 0.1));
        let got = t.score(&ScoreRequest::new("p", "h").unwrap()).unwrap();
        assert_eq!(got, v(0.7, 0.2, 0.1));
        assert!(matches!(
            t.score(&ScoreRequest::new("h", "p").unwrap()),
            Err(ScorerError::MissingEntry { .. })
        ));
    }

    #[test]
    fn batch_preserves_order_and_duplicates() {
        let t = TableScorer::new("fake")
            .with("a", "b", v(0.7, 0.2, 0.1))
            .with("c", "d", v(0.1, 0.1, 0.8));
        let r1 = ScoreRequest::new("a", "b").unwrap();
        let r2 = ScoreRequest::new("c", "d").unwrap();
        let out = t
            .score_batch(&[r1.clone(), r2.clone(), r1.clone()])
            .unwrap();
        assert_eq!(
            out,
            vec![
                t.score(&r1).unwrap(),
                t.score(&r2).unwrap(),
                t.score(&r1).unwrap()
            ]
        );
        assert_eq!(t.score_batch(&[]), Err(ScorerError::EmptyBatch));
    }

    #[test]
    fn batch_error_is_not_partial() {
        let t = TableScorer::new("fake").with("a", "b", v(0.7, 0.2, 0.1));
        let ok = ScoreRequest::new("a", "b").unwrap();
        let missing = ScoreRequest::new("x", "y").unwrap();
        assert!(t.score_batch(&[ok, missing]).is_err());
    }

    #[test]
    fn jsonl_table() {
        let t = TableScorer::from_jsonl(
            "fake",
            "{\"premise\":\"p\",\"hypothesis\":\"h\",\"entailment\":0.5,\"neutral\":0.5,\"contradiction\":0.0}\n\n",
        )
        .unwrap();
        assert_eq!(t.len(), 1);
        let bad = TableScorer::from_jsonl(
            "fake",
            "{\"premise\":\"p\",\"hypothesis\":\"h\",\"entailment\":0.9,\"neutral\":0.5,\"contradiction\":0.0}",
        );
        assert!(matches!(bad, Err(ScorerError::Malformed(_))));
    }
}
