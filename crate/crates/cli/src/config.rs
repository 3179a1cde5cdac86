//! TOML run configuration shared by every subcommand.
//!
//! ```toml
//! seed = 7
//!
//! [rl]
//! learning_rate = 5e-4
//! batch_size = 256
//!
//! [net]
//! hidden = 32
//! width = 128
//!
//! [train]
//! actors = 1
//! decks = 50000
//!
//! [service]
//! port = 8080
//! expose_insight = true
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use red10_core::policy::RLConfig;
use red10_core::training::{DeckSource, NetConfig, Phase, TrainRun};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    /// TOML syntax or schema errors; the message carries line and column.
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Actor threads; ignored when `deterministic` is set.
    pub actors: usize,
    pub decks: u64,
    pub max_seconds: Option<f64>,
    pub deterministic: bool,
    /// Share of policy-phase decks forced to the all-teammates pattern.
    pub cooperative_fraction: f64,
    pub buffer_batches: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            actors: 1,
            decks: 1000,
            max_seconds: None,
            deterministic: true,
            cooperative_fraction: 0.1,
            buffer_batches: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub decks: u64,
    pub threads: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { decks: 2000, threads: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    /// Serve `/v1/games/{id}/insight`; off by default.
    pub expose_insight: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { bind: "127.0.0.1".into(), port: 8080, expose_insight: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Checkpoint directory read by `eval`, `ablate`, `export-curves` and `serve`.
    pub models: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub rl: RLConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub service: ServiceConfig,
    pub paths: Paths,
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> Result<Config, ConfigError> {
        let config: Config =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Config::parse(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.rl.validate().map_err(|e| ConfigError::Invalid { field: "rl", reason: e.to_string() })?;
        let invalid = |field, reason: &str| Err(ConfigError::Invalid { field, reason: reason.to_string() });
        if self.net.hidden == 0 {
            return invalid("net.hidden", "must be positive");
        }
        if self.net.width == 0 {
            return invalid("net.width", "must be positive");
        }
        if self.train.actors == 0 {
            return invalid("train.actors", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.train.cooperative_fraction) {
            return invalid("train.cooperative_fraction", "must lie in [0, 1]");
        }
        if self.train.max_seconds.is_some_and(|s| !(s > 0.0)) {
            return invalid("train.max_seconds", "must be positive");
        }
        if self.train.buffer_batches == 0 {
            return invalid("train.buffer_batches", "must be positive");
        }
        if self.eval.threads == 0 {
            return invalid("eval.threads", "must be positive");
        }
        Ok(())
    }

    /// A training run for `phase` writing into `dir`, with this configuration
    /// echoed into every checkpoint manifest.
    pub fn train_run(&self, phase: Phase, dir: &Path) -> TrainRun {
        let mut run = TrainRun::new(phase, dir);
        run.config = self.rl.clone();
        run.net = self.net.clone();
        run.actors = self.train.actors;
        run.decks = self.train.decks;
        run.max_seconds = self.train.max_seconds;
        run.seed = self.seed;
        run.deterministic = self.train.deterministic;
        run.source = DeckSource::Deal { cooperative_fraction: self.train.cooperative_fraction };
        run.buffer_batches = self.train.buffer_batches;
        run.echo = Some(serde_json::to_value(self).expect("config serializes"));
        run
    }
}
