//! Server configuration: TOML file, then `LAB_SERVER_*` environment
//! overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("environment variable {name}: {message}")]
    Env { name: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    /// Listen address, `host:port`.
    pub listen: String,
    /// Open sessions allowed at once; further creates get a retry-after error.
    pub max_sessions: usize,
    /// Suggested client back-off when at capacity.
    pub retry_after_ms: u64,
    /// Frames kept per session for resuming subscribers.
    pub replay_frames: usize,
    /// Default cadence: emit after this many steps...
    pub cadence_steps: u64,
    /// ...or after this much wall time, whichever comes first.
    pub cadence_ms: u64,
    /// Tiles rendered concurrently by escape-grid sessions.
    pub tile_batch: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen: "127.0.0.1:7878".into(),
            max_sessions: 64,
            retry_after_ms: 1000,
            replay_frames: 512,
            cadence_steps: 1000,
            cadence_ms: 33,
            tile_batch: 8,
        }
    }
}

const ENV_PREFIX: &str = "LAB_SERVER_";

impl ServerConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Applies `LAB_SERVER_LISTEN`, `LAB_SERVER_MAX_SESSIONS`, … from `vars`.
    pub fn apply_env<I>(mut self, vars: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, value) in vars {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let bad = |message: String| ConfigError::Env {
                name: name.clone(),
                message,
            };
            let num = |v: &str| v.trim().parse::<u64>().map_err(|e| bad(e.to_string()));
            match key {
                "LISTEN" => self.listen = value,
                "MAX_SESSIONS" => self.max_sessions = num(&value)? as usize,
                "RETRY_AFTER_MS" => self.retry_after_ms = num(&value)?,
                "REPLAY_FRAMES" => self.replay_frames = num(&value)? as usize,
                "CADENCE_STEPS" => self.cadence_steps = num(&value)?,
                "CADENCE_MS" => self.cadence_ms = num(&value)?,
                "TILE_BATCH" => self.tile_batch = num(&value)? as usize,
                "CONFIG" => {}
                _ => return Err(bad("unknown setting".into())),
            }
        }
        if self.cadence_steps == 0 {
            return Err(ConfigError::Parse {
                path: "config".into(),
                message: "cadence_steps must be at least 1".into(),
            });
        }
        self.tile_batch = self.tile_batch.max(1);
        Ok(self)
    }
}
