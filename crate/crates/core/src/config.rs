//! `serve --config` file format (TOML).
//!
//! ```toml
//! [server]
//! tcp = "127.0.0.1:41451"
//! websocket = "127.0.0.1:41452"
//! sim_speed = "1"          # or "inf"
//! corpus = "data/corpus.json"
//!
//! [sim]
//! dt = 0.02
//!
//! [sim.home]
//! latitude = 47.64143399302358
//! longitude = -122.1401333878863
//! altitude = 122.0
//! ```
//!
//! Every key is optional.

use crate::sim::SimConfig;
use crate::wire::{SimSpeed, DEFAULT_TCP_ADDR, DEFAULT_WS_ADDR};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub tcp: String,
    /// Empty string disables the WebSocket endpoint.
    pub websocket: String,
    pub sim_speed: SimSpeed,
    /// Corpus for the `translate` method; the shipped corpus when absent.
    pub corpus: Option<PathBuf>,
    pub request_log: Option<PathBuf>,
}

impl Default for ServerSection {
    fn default() -> Self {
        Self {
            tcp: DEFAULT_TCP_ADDR.into(),
            websocket: DEFAULT_WS_ADDR.into(),
            sim_speed: SimSpeed::default(),
            corpus: None,
            request_log: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub server: ServerSection,
    pub sim: SimConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

impl ServeConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: ServeConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|message| ConfigError::Invalid {
            path: path.to_path_buf(),
            message,
        })
    }

    fn check(&self) -> Result<(), String> {
        if !(self.sim.dt > 0.0 && self.sim.dt.is_finite()) {
            return Err(format!("sim.dt must be positive, got {}", self.sim.dt));
        }
        if !self.sim.home.is_valid() {
            return Err("sim.home latitude/longitude out of range".into());
        }
        self.sim.envelope.check().map_err(|e| e.to_string())
    }
}
