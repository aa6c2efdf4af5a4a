//! Run configuration, read from a `pulse.toml`-style file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::RetryPolicy;

pub const DEFAULT_MMAP_PROMPT: &str = include_str!("../data/mmap_prompt.txt");
pub const DEFAULT_LCHART_PROMPT: &str = include_str!("../data/lchart_prompt.txt");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub endpoint: Option<String>,
    pub plan_model: String,
    pub mmap_model: String,
    pub lchart_model: String,
    pub embed_model: String,
    /// Bound on concurrent document extractions and in-flight requests.
    pub parallelism: usize,
    /// Attempts allowed per extraction before giving up.
    pub repair_limit: u32,
    pub max_tokens: u32,
    pub raster_width: u32,
    pub raster_height: u32,
    pub mmap_prompt: Option<PathBuf>,
    pub lchart_prompt: Option<PathBuf>,
    pub retry_attempts: u32,
    pub retry_base_ms: u64,
    pub retry_seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            endpoint: None,
            plan_model: "plan-agent".into(),
            mmap_model: "mmap-agent".into(),
            lchart_model: "lchart-agent".into(),
            embed_model: "abstract-embedder".into(),
            parallelism: 4,
            repair_limit: 3,
            max_tokens: 1024,
            raster_width: 1024,
            raster_height: 768,
            mmap_prompt: None,
            lchart_prompt: None,
            retry_attempts: 3,
            retry_base_ms: 500,
            retry_seed: 0,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if cfg.parallelism == 0 {
            return Err(ConfigError::Parse("parallelism must be positive".into()));
        }
        if cfg.raster_width == 0 || cfg.raster_height == 0 {
            return Err(ConfigError::Parse("raster size must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.retry_attempts,
            base_delay: Duration::from_millis(self.retry_base_ms),
            jitter: 0.1,
            seed: self.retry_seed,
        }
    }

    fn template(path: &Option<PathBuf>, default: &str) -> Result<String, ConfigError> {
        match path {
            None => Ok(default.to_string()),
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.clone(),
                source,
            }),
        }
    }

    pub fn mmap_template(&self) -> Result<String, ConfigError> {
        Self::template(&self.mmap_prompt, DEFAULT_MMAP_PROMPT)
    }

    pub fn lchart_template(&self) -> Result<String, ConfigError> {
        Self::template(&self.lchart_prompt, DEFAULT_LCHART_PROMPT)
    }
}
