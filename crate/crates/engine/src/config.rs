//! Engine configuration. Precedence: command-line flags, then the TOML file,
//! then built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sgr::augment::FilterConfig;
use sgr::eval::EvalConfig;
use sgr::gspo::DEFAULT_EPSILON;
use sgr::{EmbeddingSource, Real, RewardConfig};

use crate::error::EngineError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub profile_path: Option<PathBuf>,
    pub gt_path: Option<PathBuf>,
    pub embedding: Option<EmbeddingSource>,
    pub reward: RewardConfig,
    pub eval: EvalConfig,
    pub filter: FilterConfig,
    pub gspo: GspoConfig,
    pub server: ServerConfig,
    /// Scoring worker threads; `None` uses every core.
    pub threads: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            profile_path: None,
            gt_path: None,
            embedding: None,
            reward: RewardConfig::default(),
            eval: EvalConfig::default(),
            filter: FilterConfig::default(),
            gspo: GspoConfig::default(),
            server: ServerConfig::default(),
            threads: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GspoConfig {
    pub epsilon: Real,
}

impl Default for GspoConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub listen: String,
    pub max_batch: usize,
    pub request_timeout_secs: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            max_batch: 4096,
            request_timeout_secs: 60,
        }
    }
}

/// The value of an optional setting, or an error naming it.
pub fn required<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T, EngineError> {
    v.as_ref()
        .ok_or_else(|| EngineError::config(format!("{what} is not configured")))
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self, EngineError> {
        toml::from_str(text).map_err(|e| EngineError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        self.reward.validate()?;
        self.eval.validate()?;
        self.filter.validate()?;
        if !(self.gspo.epsilon > 0.0 && self.gspo.epsilon < 1.0) {
            return Err(EngineError::config("gspo.epsilon must lie in (0, 1)"));
        }
        if self.server.max_batch == 0 || self.server.request_timeout_secs == 0 {
            return Err(EngineError::config("server limits must be positive"));
        }
        if self.threads == Some(0) {
            return Err(EngineError::config("threads must be positive"));
        }
        Ok(())
    }
}
