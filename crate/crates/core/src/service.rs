//! Wire protocol of the model server and a small blocking client for it.
//!
//! All bodies are UTF-8 JSON.
//!
//! | endpoint        | request                                          | response                                                      |
//! |-----------------|--------------------------------------------------|---------------------------------------------------------------|
//! | `POST /v1/nli`  | `{"pairs": [{"premise", "hypothesis"}, ...]}`    | `{"verdicts": [{"entailment","neutral","contradiction"}], "model_id", "truncated": [bool]}` |
//! | `POST /v1/split`| `{"sentences": [string, ...]}`                   | `{"splits": [[string, ...], ...], "model_id"}`                |
//! | `GET /healthz`  |                                                  | `{"status": "ok"|"loading", "model_ids": {"nli", "split"}}`   |
//!
//! Status codes: 400 malformed request, 413 batch too large, 503 model not
//! loaded. Truncation of over-long inputs is done by the server, from the end
//! of the premise.

use std::collections::BTreeMap;
use std::thread;
use std::time::Duration;

use log::warn;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::NliVerdict;
use crate::error::ScorerError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliPair {
    pub premise: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliRequest {
    pub pairs: Vec<NliPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliResponse {
    pub verdicts: Vec<NliVerdict>,
    pub model_id: String,
    #[serde(default)]
    pub truncated: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRequest {
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResponse {
    pub splits: Vec<Vec<String>>,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    #[serde(default)]
    pub model_ids: BTreeMap<String, String>,
}

/// Connection settings for the model server.
#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub base_url: String,
    pub timeout: Duration,
    /// Extra attempts after a retryable failure.
    pub max_retries: u32,
    pub backoff: Duration,
    /// Largest number of items sent in one request.
    pub max_batch: usize,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            backoff: Duration::from_millis(250),
            max_batch: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ServiceClient {
    agent: ureq::Agent,
    config: RemoteConfig,
}

impl ServiceClient {
    pub(crate) fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Self { agent, config }
    }

    pub(crate) fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.base_url, path)
    }

    pub(crate) fn health(&self) -> Result<HealthResponse, ScorerError> {
        let url = self.url("/healthz");
        let health: HealthResponse = self.with_retries(|| {
            let mut resp = self.agent.get(&url).call().map_err(classify)?;
            resp.body_mut().read_json().map_err(classify)
        })?;
        Ok(health)
    }

    pub(crate) fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, ScorerError> {
        let url = self.url(path);
        self.with_retries(|| {
            let mut resp = self.agent.post(&url).send_json(body).map_err(classify)?;
            resp.body_mut().read_json().map_err(classify)
        })
    }

    fn with_retries<T>(
        &self,
        mut f: impl FnMut() -> Result<T, ScorerError>,
    ) -> Result<T, ScorerError> {
        let mut attempt = 0;
        loop {
            match f() {
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    attempt += 1;
                    let wait = self.config.backoff * 2u32.saturating_pow(attempt - 1);
                    warn!(
                        "{e}; retry {attempt}/{} in {wait:?}",
                        self.config.max_retries
                    );
                    thread::sleep(wait);
                }
                other => return other,
            }
        }
    }
}

fn classify(err: ureq::Error) -> ScorerError {
    match err {
        ureq::Error::StatusCode(code @ (429 | 502 | 503 | 504)) => {
            ScorerError::Unavailable(format!("HTTP {code}"))
        }
        ureq::Error::StatusCode(code) => ScorerError::Malformed(format!("HTTP {code}")),
        ureq::Error::Json(e) => ScorerError::Malformed(e.to_string()),
        other => ScorerError::Unavailable(other.to_string()),
    }
}
