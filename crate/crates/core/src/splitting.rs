//! Sub-sentence reasoning: split summary sentences into simpler parts, score
//! each part with incremental retrieval, and keep the weakest part's score.
//!
//! A splitter failure never aborts an evaluation; the sentence is kept whole
//! and a warning is recorded on the [`SplitResult`].

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use log::warn;

use crate::algorithms::{infuse_sentence, Aggregator, RetrievalConfig, RetrievalTrace};
use crate::domain::{whitespace_tokens, Document, Sentence, Summary, SummaryUnit};
use crate::error::{AlgoError, ScorerError};
use crate::scorer::NliScorer;
use crate::service::{RemoteConfig, ServiceClient, SplitRequest, SplitResponse};
use crate::store::{digest, AppendLog};

/// Parts longer than this multiple of the original (in tokens) are discarded.
pub const MAX_EXPANSION: usize = 4;

pub const SPLIT_CACHE_HEADER: &str = "infuse-split-cache v1";

pub trait Splitter: Send + Sync {
    fn id(&self) -> &str;

    fn split(&self, text: &str) -> Result<Vec<String>, ScorerError>;

    /// Element `i` equals `split(texts[i])`.
    fn split_batch(&self, texts: &[String]) -> Result<Vec<Vec<String>>, ScorerError> {
        texts.iter().map(|t| self.split(t)).collect()
    }
}

impl<T: Splitter + ?Sized> Splitter for &T {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn split(&self, text: &str) -> Result<Vec<String>, ScorerError> {
        (**self).split(text)
    }
    fn split_batch(&self, texts: &[String]) -> Result<Vec<Vec<String>>, ScorerError> {
        (**self).split_batch(texts)
    }
}

impl<T: Splitter + ?Sized> Splitter for Box<T> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn split(&self, text: &str) -> Result<Vec<String>, ScorerError> {
        (**self).split(text)
    }
    fn split_batch(&self, texts: &[String]) -> Result<Vec<Vec<String>>, ScorerError> {
        (**self).split_batch(texts)
    }
}

/// Never splits.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentitySplitter;

impl Splitter for IdentitySplitter {
    fn id(&self) -> &str {
        "identity"
    }

    fn split(&self, text: &str) -> Result<Vec<String>, ScorerError> {
        Ok(vec![text.to_owned()])
    }
}

/// Splits from an explicit table; unknown sentences stay whole.
#[derive(Debug, Clone, Default)]
pub struct TableSplitter {
    id: String,
    entries: HashMap<String, Vec<String>>,
}

impl TableSplitter {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            entries: HashMap::new(),
        }
    }

    pub fn with<S: Into<String>>(
        mut self,
        sentence: impl Into<String>,
        parts: impl IntoIterator<Item = S>,
    ) -> Self {
        self.entries
            .insert(sentence.into(), parts.into_iter().map(Into::into).collect());
        self
    }

    /// Load a table from JSON lines of `{"sentence", "parts"}`.
    pub fn from_jsonl(id: impl Into<String>, contents: &str) -> Result<Self, ScorerError> {
        #[derive(serde::Deserialize)]
        struct Row {
            sentence: String,
            parts: Vec<String>,
        }
        let mut table = Self::new(id);
        for (i, line) in contents.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(line)
                .map_err(|e| ScorerError::Malformed(format!("split table line {}: {e}", i + 1)))?;
            table.entries.insert(row.sentence, row.parts);
        }
        Ok(table)
    }
}

impl Splitter for TableSplitter {
    fn id(&self) -> &str {
        &self.id
    }

    fn split(&self, text: &str) -> Result<Vec<String>, ScorerError> {
        Ok(self
            .entries
            .get(text)
            .cloned()
            .unwrap_or_else(|| vec![text.to_owned()]))
    }
}

/// Client for the `/v1/split` endpoint.
#[derive(Debug, Clone)]
pub struct RemoteSplitter {
    client: ServiceClient,
    id: String,
}

impl RemoteSplitter {
    pub fn connect(config: RemoteConfig) -> Result<Self, ScorerError> {
        let client = ServiceClient::new(config);
        let health = client.health()?;
        if health.status != "ok" {
            return Err(ScorerError::Unavailable(format!(
                "service status `{}`",
                health.status
            )));
        }
        let model = health.model_ids.get("split").ok_or_else(|| {
            ScorerError::Malformed("health response lacks a split model id".into())
        })?;
        Ok(Self {
            id: format!("remote:{model}"),
            client,
        })
    }
}

impl Splitter for RemoteSplitter {
    fn id(&self) -> &str {
        &self.id
    }

    fn split(&self, text: &str) -> Result<Vec<String>, ScorerError> {
        Ok(self.split_batch(&[text.to_owned()])?.remove(0))
    }

    fn split_batch(&self, texts: &[String]) -> Result<Vec<Vec<String>>, ScorerError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.client.config().max_batch.max(1)) {
            let resp: SplitResponse = self.client.post(
                "/v1/split",
                &SplitRequest {
                    sentences: chunk.to_vec(),
                },
            )?;
            if resp.splits.len() != chunk.len() {
                return Err(ScorerError::Malformed(format!(
                    "sent {} sentences, got {} splits",
                    chunk.len(),
                    resp.splits.len()
                )));
            }
            out.extend(resp.splits);
        }
        Ok(out)
    }
}

type SplitKey = (String, [u8; 32]);

/// Caching wrapper keyed by `(splitter id, sha256(text))`.
///
/// File format: a header line [`SPLIT_CACHE_HEADER`], then one
/// `<splitter_id>\t<sha256 hex>\t<JSON array of parts>` record per line.
pub struct CachedSplitter<S> {
    inner: S,
    map: RwLock<HashMap<SplitKey, Vec<String>>>,
    log: AppendLog,
}

impl<S: Splitter> CachedSplitter<S> {
    pub fn in_memory(inner: S) -> Self {
        Self {
            inner,
            map: RwLock::new(HashMap::new()),
            log: AppendLog::disabled(SPLIT_CACHE_HEADER),
        }
    }

    pub fn open(inner: S, path: &Path) -> Self {
        let (log, lines) = AppendLog::open(path, SPLIT_CACHE_HEADER);
        let mut map = HashMap::new();
        for line in lines {
            let mut fields = line.splitn(3, '\t');
            let (Some(id), Some(hash), Some(parts)) = (fields.next(), fields.next(), fields.next())
            else {
                continue;
            };
            let Some(hash) = hex::decode(hash)
                .ok()
                .and_then(|h| <[u8; 32]>::try_from(h).ok())
            else {
                continue;
            };
            if let Ok(parts) = serde_json::from_str::<Vec<String>>(parts) {
                map.insert((id.to_owned(), hash), parts);
            }
        }
        Self {
            inner,
            map: RwLock::new(map),
            log,
        }
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<S: Splitter> Splitter for CachedSplitter<S> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn split(&self, text: &str) -> Result<Vec<String>, ScorerError> {
        Ok(self.split_batch(&[text.to_owned()])?.remove(0))
    }

    /// Misses are sent to the inner splitter as one batch.
    fn split_batch(&self, texts: &[String]) -> Result<Vec<Vec<String>>, ScorerError> {
        let id = self.inner.id().to_owned();
        let keys: Vec<[u8; 32]> = texts.iter().map(|t| digest(t)).collect();
        let mut out: Vec<Option<Vec<String>>> = {
            let map = self.map.read().unwrap_or_else(|p| p.into_inner());
            keys.iter()
                .map(|k| map.get(&(id.clone(), *k)).cloned())
                .collect()
        };
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        if missing.is_empty() {
            return Ok(out.into_iter().flatten().collect());
        }
        let miss_texts: Vec<String> = missing.iter().map(|&i| texts[i].clone()).collect();
        let parts = self.inner.split_batch(&miss_texts)?;
        if parts.len() != miss_texts.len() {
            return Err(ScorerError::Malformed(format!(
                "inner splitter returned {} results for {} sentences",
                parts.len(),
                miss_texts.len()
            )));
        }
        let mut lines = Vec::new();
        {
            let mut map = self.map.write().unwrap_or_else(|p| p.into_inner());
            for (&i, p) in missing.iter().zip(parts) {
                if map.insert((id.clone(), keys[i]), p.clone()).is_none()
                    && !id.contains(['\t', '\n'])
                {
                    let json = serde_json::to_string(&p).expect("string list serializes");
                    lines.push(format!("{id}\t{}\t{json}", hex::encode(keys[i])));
                }
                out[i] = Some(p);
            }
        }
        self.log.append(lines);
        Ok(out
            .into_iter()
            .map(|p| p.expect("every slot filled"))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub original: Sentence,
    pub parts: Vec<Sentence>,
    /// Why the splitter output was replaced by the original sentence.
    pub warning: Option<String>,
}

impl SplitResult {
    fn identity(original: &Sentence, warning: Option<String>) -> Self {
        if let Some(w) = &warning {
            warn!("keeping sentence {} whole: {w}", original.index());
        }
        Self {
            original: original.clone(),
            parts: vec![original.clone()],
            warning,
        }
    }

    pub fn is_split(&self) -> bool {
        self.parts.len() > 1 || self.parts[0].text() != self.original.text()
    }
}

/// Split one sentence, falling back to the sentence itself on splitter
/// failure, empty output, or output over [`MAX_EXPANSION`] times the original
/// length.
pub fn split_sentence<P: Splitter + ?Sized>(sentence: &Sentence, splitter: &P) -> SplitResult {
    match splitter.split(sentence.text()) {
        Ok(parts) => validate_parts(sentence, parts),
        Err(e) => SplitResult::identity(sentence, Some(format!("splitter failed: {e}"))),
    }
}

fn validate_parts(sentence: &Sentence, parts: Vec<String>) -> SplitResult {
    if parts.is_empty() {
        return SplitResult::identity(sentence, Some("splitter returned no parts".into()));
    }
    if parts.iter().any(|p| p.trim().is_empty()) {
        return SplitResult::identity(sentence, Some("splitter returned an empty part".into()));
    }
    let total: usize = parts.iter().map(|p| whitespace_tokens(p)).sum();
    if total > MAX_EXPANSION * sentence.token_count() {
        return SplitResult::identity(
            sentence,
            Some(format!(
                "{total} output tokens for a {}-token sentence",
                sentence.token_count()
            )),
        );
    }
    let parts = parts
        .iter()
        .enumerate()
        .map(|(i, p)| Sentence::new(i, p).expect("checked non-empty"))
        .collect();
    SplitResult {
        original: sentence.clone(),
        parts,
        warning: None,
    }
}

/// Split every summary sentence, attaching the parts to its unit.
pub fn split_summary<P: Splitter + ?Sized>(
    summary: &Summary,
    splitter: &P,
) -> (Summary, Vec<SplitResult>) {
    let texts: Vec<String> = summary.sentences().map(|s| s.text().to_owned()).collect();
    let results: Vec<SplitResult> = match splitter.split_batch(&texts) {
        Ok(all) if all.len() == texts.len() => summary
            .sentences()
            .zip(all)
            .map(|(s, parts)| validate_parts(s, parts))
            .collect(),
        Ok(_) | Err(_) => summary
            .sentences()
            .map(|s| split_sentence(s, splitter))
            .collect(),
    };
    let units = results
        .iter()
        .map(|r| {
            SummaryUnit::with_parts(r.original.clone(), r.parts.clone())
                .expect("parts are never empty")
        })
        .collect();
    (Summary::new(units).expect("summary is non-empty"), results)
}

/// Score each sub-sentence of `unit` with incremental retrieval and combine
/// with `aggregator` (min by default).
pub fn infuse_sub<S: NliScorer + ?Sized>(
    doc: &Document,
    unit: &SummaryUnit,
    scorer: &S,
    config: &RetrievalConfig,
    aggregator: Aggregator,
) -> Result<(f64, Vec<RetrievalTrace>), AlgoError> {
    let mut scores = Vec::with_capacity(unit.sub_sentences().len());
    let mut traces = Vec::with_capacity(unit.sub_sentences().len());
    for part in unit.sub_sentences() {
        let (score, trace) = infuse_sentence(doc, part, scorer, config)?;
        scores.push(score);
        traces.push(trace);
    }
    Ok((aggregator.apply(&scores)?, traces))
}

/// Split `sentence` with `splitter`, then run [`infuse_sub`].
pub fn infuse_sub_sentence<S: NliScorer + ?Sized, P: Splitter + ?Sized>(
    doc: &Document,
    sentence: &Sentence,
    scorer: &S,
    splitter: &P,
    config: &RetrievalConfig,
) -> Result<f64, AlgoError> {
    let split = split_sentence(sentence, splitter);
    let unit = SummaryUnit::with_parts(split.original, split.parts).expect("parts are never empty");
    infuse_sub(doc, &unit, scorer, config, Aggregator::Min).map(|(s, _)| s)
}

/// Shareable splitter handle.
pub type SharedSplitter = Arc<dyn Splitter>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::infuse_sentence;
    use crate::domain::NliVerdict;
    use crate::scorer::{LexicalScorer, TableScorer};

    const JACKET: &str =
        "Heritage auctions offered the gray jacket featuring a black zigzag applique";

    fn table4() -> TableSplitter {
        TableSplitter::new("table4").with(
            JACKET,
            [
                "Heritage auctions offered the gray jacket.",
                "The gray jacket featured a black zigzag applique.",
            ],
        )
    }

    struct Failing;
    impl Splitter for Failing {
        fn id(&self) -> &str {
            "failing"
        }
        fn split(&self, _: &str) -> Result<Vec<String>, ScorerError> {
            Err(ScorerError::Unavailable("down".into()))
        }
    }

    struct Runaway;
    impl Splitter for Runaway {
        fn id(&self) -> &str {
            "runaway"
        }
        fn split(&self, text: &str) -> Result<Vec<String>, ScorerError> {
            Ok(vec![[text; 5].join(" ")])
        }
    }

    #[test]
    fn splits_fused_sentence() {
        let s = Sentence::new(0, JACKET).unwrap();
        let r = split_sentence(&s, &table4());
        let parts: Vec<&str> = r.parts.iter().map(Sentence::text).collect();
        assert_eq!(
            parts,
            vec![
                "Heritage auctions offered the gray jacket.",
                "The gray jacket featured a black zigzag applique."
            ]
        );
        assert!(r.is_split());
    }

    #[test]
    fn simple_sentence_stays_whole() {
        let s = Sentence::new(0, "Change is a problem for many disabled people.").unwrap();
        let r = split_sentence(&s, &table4());
        assert_eq!(r.parts, vec![s.clone()]);
        assert!(!r.is_split());
        assert_eq!(split_sentence(&s, &IdentitySplitter).parts, vec![s]);
    }

    #[test]
    fn failures_fall_back_to_identity() {
        let s = Sentence::new(0, "One two three.").unwrap();
        let r = split_sentence(&s, &Failing);
        assert_eq!(r.parts, vec![s.clone()]);
        assert!(r.warning.unwrap().contains("down"));
        let r = split_sentence(&s, &Runaway);
        assert_eq!(r.parts, vec![s.clone()]);
        assert!(r.warning.is_some());
        let empty = TableSplitter::new("e").with("One two three.", Vec::<String>::new());
        assert_eq!(split_sentence(&s, &empty).parts, vec![s]);
    }

    #[test]
    fn cached_splitter_persists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("splits.cache");
        let first = CachedSplitter::open(table4(), &path);
        let parts = first.split(JACKET).unwrap();
        drop(first);
        let reopened = CachedSplitter::open(IdentitySplitter, &path);
        assert_eq!(reopened.len(), 1);
        assert_eq!(reopened.split(JACKET).unwrap(), vec![JACKET.to_owned()]);
        let reopened = CachedSplitter::open(TableSplitter::new("table4"), &path);
        assert_eq!(reopened.split(JACKET).unwrap(), parts);
    }

    fn unit_with_parts(parts: &[&str]) -> SummaryUnit {
        let whole = Sentence::new(0, parts.join(" ")).unwrap();
        let parts = parts
            .iter()
            .enumerate()
            .map(|(i, p)| Sentence::new(i, p).unwrap())
            .collect();
        SummaryUnit::with_parts(whole, parts).unwrap()
    }

    #[test]
    fn min_over_parts() {
        let doc = Document::from_texts(["d"]).unwrap();
        let v = |e: f64| NliVerdict::new(e, 1.0 - e, 0.0).unwrap();
        let t = TableScorer::new("t")
            .with("d", "p1", v(0.9))
            .with("p1", "d", v(0.0))
            .with("d", "p2", v(0.2))
            .with("p2", "d", v(0.0));
        let cfg = RetrievalConfig::default();
        let (score, traces) = infuse_sub(
            &doc,
            &unit_with_parts(&["p1", "p2"]),
            &t,
            &cfg,
            Aggregator::Min,
        )
        .unwrap();
        assert_eq!((score, traces.len()), (0.2, 2));
        let (single, _) =
            infuse_sub(&doc, &unit_with_parts(&["p1"]), &t, &cfg, Aggregator::Min).unwrap();
        let direct = infuse_sentence(&doc, &Sentence::new(0, "p1").unwrap(), &t, &cfg)
            .unwrap()
            .0;
        assert_eq!(single, direct);
        let (mean, _) = infuse_sub(
            &doc,
            &unit_with_parts(&["p1", "p2"]),
            &t,
            &cfg,
            Aggregator::Mean,
        )
        .unwrap();
        assert!((mean - 0.55).abs() < 1e-12);
    }

    #[test]
    fn identity_split_matches_plain_infuse() {
        let doc = Document::from_texts(["The cat sat on the mat.", "It was warm."]).unwrap();
        let s = Sentence::new(0, "The cat sat.").unwrap();
        let cfg = RetrievalConfig::default();
        let sub = infuse_sub_sentence(&doc, &s, &LexicalScorer, &IdentitySplitter, &cfg).unwrap();
        let plain = infuse_sentence(&doc, &s, &LexicalScorer, &cfg).unwrap().0;
        assert_eq!(sub, plain);
    }

    #[test]
    fn split_summary_attaches_parts() {
        let summary = Summary::from_texts([JACKET, "Nothing to split here."]).unwrap();
        let (split, results) = split_summary(&summary, &table4());
        assert_eq!(split.units()[0].sub_sentences().len(), 2);
        assert_eq!(split.units()[1].sub_sentences().len(), 1);
        assert!(results.iter().all(|r| r.warning.is_none()));
    }
}
