//! Persistent verdict cache.
//!
//! File format (version 1), UTF-8, one record per line after a header:
//!
//! ```text
//! infuse-nli-cache v1
//! <scorer_id>\t<sha256(premise) hex>\t<sha256(hypothesis) hex>\t<entailment>\t<neutral>\t<contradiction>
//! ```
//!
//! Probabilities are written with Rust's shortest round-trip float formatting,
//! so a reload yields bit-identical verdicts. Records are only ever appended;
//! the only eviction is [`CacheStore::reset`], which truncates the whole file.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use log::warn;

use crate::domain::NliVerdict;
use crate::error::ScorerError;
use crate::store::{digest, AppendLog};

use super::{NliScorer, ScoreRequest, ScorerStats, StatsCounter};

pub const CACHE_FORMAT_HEADER: &str = "infuse-nli-cache v1";

/// Direction-sensitive cache key: `(p, h)` and `(h, p)` differ.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub scorer_id: String,
    pub premise_digest: [u8; 32],
    pub hypothesis_digest: [u8; 32],
}

impl CacheKey {
    pub fn new(scorer_id: &str, req: &ScoreRequest) -> Self {
        Self {
            scorer_id: scorer_id.to_owned(),
            premise_digest: digest(&req.premise),
            hypothesis_digest: digest(&req.hypothesis),
        }
    }

    fn encode(&self, v: &NliVerdict) -> Option<String> {
        if self.scorer_id.contains(['\t', '\n', '\r']) {
            return None;
        }
        Some(format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.scorer_id,
            hex::encode(self.premise_digest),
            hex::encode(self.hypothesis_digest),
            v.entailment,
            v.neutral,
            v.contradiction
        ))
    }

    fn decode(line: &str) -> Option<(Self, NliVerdict)> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, p, h, e, u, c] = fields.as_slice() else {
            return None;
        };
        let hash = |s: &str| -> Option<[u8; 32]> { hex::decode(s).ok()?.try_into().ok() };
        let verdict = NliVerdict::new(e.parse().ok()?, u.parse().ok()?, c.parse().ok()?).ok()?;
        Some((
            Self {
                scorer_id: (*id).to_owned(),
                premise_digest: hash(p)?,
                hypothesis_digest: hash(h)?,
            },
            verdict,
        ))
    }
}

/// Shared verdict storage. Several [`CachedScorer`] views may share one store.
#[derive(Debug)]
pub struct CacheStore {
    map: RwLock<HashMap<CacheKey, NliVerdict>>,
    log: AppendLog,
}

impl CacheStore {
    pub fn in_memory() -> Self {
        Self {
            map: RwLock::new(HashMap::new()),
            log: AppendLog::disabled(CACHE_FORMAT_HEADER),
        }
    }

    /// Open a file-backed store. I/O problems degrade to an in-memory store.
    pub fn open(path: &Path) -> Self {
        let (log, lines) = AppendLog::open(path, CACHE_FORMAT_HEADER);
        let mut map = HashMap::with_capacity(lines.len());
        let mut skipped = 0usize;
        for line in &lines {
            match CacheKey::decode(line) {
                Some((k, v)) => {
                    map.insert(k, v);
                }
                None => skipped += 1,
            }
        }
        if skipped > 0 {
            warn!(
                "skipped {skipped} unreadable record(s) in {}",
                path.display()
            );
        }
        Self {
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

    pub fn path(&self) -> Option<&Path> {
        self.log.path()
    }

    pub fn get(&self, key: &CacheKey) -> Option<NliVerdict> {
        self.map
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(key)
            .copied()
    }

    /// Insert entries not yet present; returns how many were new.
    fn insert_all(&self, entries: Vec<(CacheKey, NliVerdict)>) -> usize {
        let mut fresh = Vec::new();
        {
            let mut map = self.map.write().unwrap_or_else(|p| p.into_inner());
            for (k, v) in entries {
                if let Entry::Vacant(slot) = map.entry(k.clone()) {
                    slot.insert(v);
                    fresh.push((k, v));
                }
            }
        }
        let n = fresh.len();
        if n > 0 {
            self.log
                .append(fresh.iter().filter_map(|(k, v)| k.encode(v)));
        }
        n
    }

    /// Drop every entry and truncate the backing file.
    pub fn reset(&self) {
        self.map.write().unwrap_or_else(|p| p.into_inner()).clear();
        self.log.reset();
    }
}

/// Caching view over an inner scorer.
///
/// A request counts as a cache hit unless this view is the one that stored
/// its verdict, so hit counts do not depend on thread interleaving.
pub struct CachedScorer<S> {
    inner: S,
    store: Arc<CacheStore>,
    stats: StatsCounter,
}

impl<S: NliScorer> CachedScorer<S> {
    pub fn new(inner: S, store: Arc<CacheStore>) -> Self {
        Self {
            inner,
            store,
            stats: StatsCounter::default(),
        }
    }

    pub fn in_memory(inner: S) -> Self {
        Self::new(inner, Arc::new(CacheStore::in_memory()))
    }

    pub fn stats(&self) -> ScorerStats {
        self.stats.snapshot()
    }

    pub fn reset_stats(&self) {
        self.stats.reset();
    }

    pub fn store(&self) -> &Arc<CacheStore> {
        &self.store
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }
}

impl<S: NliScorer> NliScorer for CachedScorer<S> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn score(&self, req: &ScoreRequest) -> Result<NliVerdict, ScorerError> {
        self.stats.calls(1);
        let key = CacheKey::new(self.inner.id(), req);
        if let Some(v) = self.store.get(&key) {
            self.stats.hits(1);
            return Ok(v);
        }
        let v = self.inner.score(req)?;
        if self.store.insert_all(vec![(key, v)]) == 0 {
            self.stats.hits(1);
        }
        Ok(v)
    }

    fn score_batch(&self, reqs: &[ScoreRequest]) -> Result<Vec<NliVerdict>, ScorerError> {
        if reqs.is_empty() {
            return Err(ScorerError::EmptyBatch);
        }
        self.stats.calls(reqs.len());
        self.stats.batch();
        let keys: Vec<CacheKey> = reqs
            .iter()
            .map(|r| CacheKey::new(self.inner.id(), r))
            .collect();
        let mut out: Vec<Option<NliVerdict>> = keys.iter().map(|k| self.store.get(k)).collect();

        // Unique misses, in first-occurrence order.
        let mut miss_slot: HashMap<&CacheKey, usize> = HashMap::new();
        let mut miss_reqs = Vec::new();
        let mut miss_keys = Vec::new();
        for (i, key) in keys.iter().enumerate() {
            if out[i].is_none() && !miss_slot.contains_key(key) {
                miss_slot.insert(key, miss_reqs.len());
                miss_reqs.push(reqs[i].clone());
                miss_keys.push(key.clone());
            }
        }
        let mut fresh = 0;
        if !miss_reqs.is_empty() {
            let verdicts = self.inner.score_batch(&miss_reqs)?;
            if verdicts.len() != miss_reqs.len() {
                return Err(ScorerError::Malformed(format!(
                    "inner scorer returned {} verdicts for {} requests",
                    verdicts.len(),
                    miss_reqs.len()
                )));
            }
            for (i, key) in keys.iter().enumerate() {
                if out[i].is_none() {
                    out[i] = Some(verdicts[miss_slot[key]]);
                }
            }
            fresh = self
                .store
                .insert_all(miss_keys.into_iter().zip(verdicts).collect());
        }
        self.stats.hits(reqs.len() - fresh);
        Ok(out
            .into_iter()
            .map(|v| v.expect("every slot filled"))
            .collect())
    }
}
