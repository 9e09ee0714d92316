use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbeddingProvider, EmbeddingVector, ProviderInfo};
use crate::error::{Error, Result};
use crate::Embedding;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint_url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_timeout_ms() -> u64 {
    10_000
}
fn default_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    200
}

impl RemoteConfig {
    pub fn new(endpoint_url: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_retries(),
            backoff_ms: default_backoff_ms(),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    keys: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for an external `POST /embed` service.
///
/// Transport failures and 5xx responses are retried with linear backoff;
/// 4xx responses are not.
pub struct RemoteProvider {
    cfg: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(cfg: RemoteConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build();
        Self { cfg, agent }
    }

    fn url(&self) -> String {
        format!("{}/embed", self.cfg.endpoint_url.trim_end_matches('/'))
    }

    fn unavailable(&self, attempts: u32, message: String) -> Error {
        Error::ProviderUnavailable {
            endpoint: self.url(),
            attempts,
            message,
        }
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn embed_batch(&self, keys: &[&str]) -> Result<Vec<Embedding>> {
        if keys.is_empty() {
            return Ok(Vec::new());
        }
        let url = self.url();
        let mut attempt = 0;
        let body: EmbedResponse = loop {
            attempt += 1;
            let res = self.agent.post(&url).send_json(EmbedRequest { keys });
            let retryable = match res {
                Ok(resp) => {
                    break resp
                        .into_json()
                        .map_err(|e| self.unavailable(attempt, format!("bad response body: {e}")))?;
                }
                Err(ureq::Error::Status(code, _)) if code < 500 => {
                    return Err(self.unavailable(attempt, format!("HTTP {code}")));
                }
                Err(e) => e.to_string(),
            };
            if attempt > self.cfg.max_retries {
                return Err(self.unavailable(attempt, retryable));
            }
            log::warn!("embedding request to {url} failed ({retryable}); retrying");
            std::thread::sleep(Duration::from_millis(self.cfg.backoff_ms * attempt as u64));
        };
        if body.vectors.len() != keys.len() {
            return Err(self.unavailable(
                attempt,
                format!("expected {} vectors, got {}", keys.len(), body.vectors.len()),
            ));
        }
        body.vectors
            .into_iter()
            .map(EmbeddingVector::normalized)
            .collect()
    }

    fn info(&self) -> ProviderInfo {
        ProviderInfo {
            mode: "remote".into(),
            location: self.cfg.endpoint_url.clone(),
            dim: None,
        }
    }
}
