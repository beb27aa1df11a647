//! The NLI scoring contract and its implementations.
//!
//! A scorer maps a (premise, hypothesis) pair to an [`NliVerdict`]. All
//! scorers are deterministic for a fixed [`NliScorer::id`], which is what
//! lets [`CachedScorer`] key results by content digest.

mod cache;
mod lexical;
mod remote;
mod table;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cache::{CacheKey, CacheStore, CachedScorer, CACHE_FORMAT_HEADER};
pub use lexical::LexicalScorer;
pub use remote::{HealthStatus, RemoteConfig, RemoteScorer, DEFAULT_SERVICE_URL_ENV};
pub use table::TableScorer;

use crate::domain::NliVerdict;
use crate::error::ScorerError;

/// A premise/hypothesis pair to score.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub premise: String,
    pub hypothesis: String,
}

impl ScoreRequest {
    pub fn new(
        premise: impl Into<String>,
        hypothesis: impl Into<String>,
    ) -> Result<Self, ScorerError> {
        let premise = premise.into();
        let hypothesis = hypothesis.into();
        if premise.trim().is_empty() {
            return Err(ScorerError::InvalidRequest("empty premise"));
        }
        if hypothesis.trim().is_empty() {
            return Err(ScorerError::InvalidRequest("empty hypothesis"));
        }
        Ok(Self {
            premise,
            hypothesis,
        })
    }

    pub fn reversed(&self) -> Self {
        Self {
            premise: self.hypothesis.clone(),
            hypothesis: self.premise.clone(),
        }
    }
}

pub trait NliScorer: Send + Sync {
    /// Identifies the model behind this scorer. Two scorers with the same id
    /// must return the same verdict for the same request.
    fn id(&self) -> &str;

    fn score(&self, req: &ScoreRequest) -> Result<NliVerdict, ScorerError>;

    /// Score several requests; element `i` equals `score(&reqs[i])`.
    fn score_batch(&self, reqs: &[ScoreRequest]) -> Result<Vec<NliVerdict>, ScorerError> {
        if reqs.is_empty() {
            return Err(ScorerError::EmptyBatch);
        }
        reqs.iter().map(|r| self.score(r)).collect()
    }
}

impl<T: NliScorer + ?Sized> NliScorer for &T {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn score(&self, req: &ScoreRequest) -> Result<NliVerdict, ScorerError> {
        (**self).score(req)
    }
    fn score_batch(&self, reqs: &[ScoreRequest]) -> Result<Vec<NliVerdict>, ScorerError> {
        (**self).score_batch(reqs)
    }
}

impl<T: NliScorer + ?Sized> NliScorer for Box<T> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn score(&self, req: &ScoreRequest) -> Result<NliVerdict, ScorerError> {
        (**self).score(req)
    }
    fn score_batch(&self, reqs: &[ScoreRequest]) -> Result<Vec<NliVerdict>, ScorerError> {
        (**self).score_batch(reqs)
    }
}

impl<T: NliScorer + ?Sized> NliScorer for Arc<T> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn score(&self, req: &ScoreRequest) -> Result<NliVerdict, ScorerError> {
        (**self).score(req)
    }
    fn score_batch(&self, reqs: &[ScoreRequest]) -> Result<Vec<NliVerdict>, ScorerError> {
        (**self).score_batch(reqs)
    }
}

/// Snapshot of scorer-call accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerStats {
    /// Requests received, counted before any caching.
    pub total_calls: u64,
    /// Requests answered from the cache.
    pub cache_hits: u64,
    /// Calls to `score_batch`.
    pub batch_count: u64,
}

impl ScorerStats {
    pub fn inner_calls(&self) -> u64 {
        self.total_calls - self.cache_hits
    }
}

impl std::ops::Add for ScorerStats {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            total_calls: self.total_calls + rhs.total_calls,
            cache_hits: self.cache_hits + rhs.cache_hits,
            batch_count: self.batch_count + rhs.batch_count,
        }
    }
}

#[derive(Debug, Default)]
pub(crate) struct StatsCounter {
    total_calls: AtomicU64,
    cache_hits: AtomicU64,
    batch_count: AtomicU64,
}

impl StatsCounter {
    pub(crate) fn calls(&self, n: usize) {
        self.total_calls.fetch_add(n as u64, Ordering::Relaxed);
    }

    pub(crate) fn hits(&self, n: usize) {
        self.cache_hits.fetch_add(n as u64, Ordering::Relaxed);
    }

    pub(crate) fn batch(&self) {
        self.batch_count.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn snapshot(&self) -> ScorerStats {
        ScorerStats {
            total_calls: self.total_calls.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
            batch_count: self.batch_count.load(Ordering::Relaxed),
        }
    }

    pub(crate) fn reset(&self) {
        self.total_calls.store(0, Ordering::Relaxed);
        self.cache_hits.store(0, Ordering::Relaxed);
        self.batch_count.store(0, Ordering::Relaxed);
    }
}

/// Pass-through wrapper that counts the calls made to the inner scorer.
#[derive(Debug)]
pub struct CountingScorer<S> {
    inner: S,
    stats: StatsCounter,
}

impl<S: NliScorer> CountingScorer<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            stats: StatsCounter::default(),
        }
    }

    pub fn stats(&self) -> ScorerStats {
        self.stats.snapshot()
    }

    pub fn reset_stats(&self) {
        self.stats.reset();
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }
}

impl<S: NliScorer> NliScorer for CountingScorer<S> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn score(&self, req: &ScoreRequest) -> Result<NliVerdict, ScorerError> {
        self.stats.calls(1);
        self.inner.score(req)
    }

    fn score_batch(&self, reqs: &[ScoreRequest]) -> Result<Vec<NliVerdict>, ScorerError> {
        self.stats.calls(reqs.len());
        self.stats.batch();
        self.inner.score_batch(reqs)
    }
}
