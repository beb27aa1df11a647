use crate::domain::NliVerdict;
use crate::error::ScorerError;
use crate::service::{NliPair, NliRequest, NliResponse, ServiceClient};

pub use crate::service::RemoteConfig;

use super::{NliScorer, ScoreRequest};

/// Environment variable holding the default model-server URL.
pub const DEFAULT_SERVICE_URL_ENV: &str = "INFUSE_SERVICE_URL";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HealthStatus {
    pub nli_model: Option<String>,
    pub split_model: Option<String>,
}

/// Client for the `/v1/nli` endpoint. Sends full texts; truncation is the
/// server's business.
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    client: ServiceClient,
    id: String,
}

impl RemoteScorer {
    /// Health-check the server and take the scorer id from the NLI model id
    /// it reports, so a model swap behind the same URL changes cache keys.
    pub fn connect(config: RemoteConfig) -> Result<Self, ScorerError> {
        let client = ServiceClient::new(config);
        let health = client.health()?;
        if health.status != "ok" {
            return Err(ScorerError::Unavailable(format!(
                "service status `{}`",
                health.status
            )));
        }
        let model = health.model_ids.get("nli").ok_or_else(|| {
            ScorerError::Malformed("health response lacks an nli model id".into())
        })?;
        Ok(Self {
            id: format!("remote:{model}"),
            client,
        })
    }

    /// Query health without constructing a scorer.
    pub fn health(config: RemoteConfig) -> Result<HealthStatus, ScorerError> {
        let health = ServiceClient::new(config).health()?;
        if health.status != "ok" {
            return Err(ScorerError::Unavailable(format!(
                "service status `{}`",
                health.status
            )));
        }
        Ok(HealthStatus {
            nli_model: health.model_ids.get("nli").cloned(),
            split_model: health.model_ids.get("split").cloned(),
        })
    }

    fn call(&self, reqs: &[ScoreRequest]) -> Result<Vec<NliVerdict>, ScorerError> {
        let body = NliRequest {
            pairs: reqs
                .iter()
                .map(|r| NliPair {
                    premise: r.premise.clone(),
                    hypothesis: r.hypothesis.clone(),
                })
                .collect(),
        };
        let resp: NliResponse = self.client.post("/v1/nli", &body)?;
        if resp.verdicts.len() != reqs.len() {
            return Err(ScorerError::Malformed(format!(
                "sent {} pairs, got {} verdicts",
                reqs.len(),
                resp.verdicts.len()
            )));
        }
        if format!("remote:{}", resp.model_id) != self.id {
            return Err(ScorerError::Malformed(format!(
                "server answered with model `{}`, expected `{}`",
                resp.model_id, self.id
            )));
        }
        Ok(resp.verdicts)
    }
}

impl NliScorer for RemoteScorer {
    fn id(&self) -> &str {
        &self.id
    }

    fn score(&self, req: &ScoreRequest) -> Result<NliVerdict, ScorerError> {
        Ok(self.call(std::slice::from_ref(req))?[0])
    }

    fn score_batch(&self, reqs: &[ScoreRequest]) -> Result<Vec<NliVerdict>, ScorerError> {
        if reqs.is_empty() {
            return Err(ScorerError::EmptyBatch);
        }
        let mut out = Vec::with_capacity(reqs.len());
        for chunk in reqs.chunks(self.client.config().max_batch.max(1)) {
            out.extend(self.call(chunk)?);
        }
        Ok(out)
    }
}
