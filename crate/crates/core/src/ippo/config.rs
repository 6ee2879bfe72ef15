//! Training hyperparameters, loadable from TOML.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("{field}: {msg}")]
    Invalid { field: &'static str, msg: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub clip_eps: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Agent-steps per iteration; whole episodes are collected until reached.
    pub batch_size: usize,
    /// 0 means one minibatch per epoch.
    pub minibatch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub hidden: Vec<usize>,
    /// Episodes simulated concurrently. Results do not depend on it.
    pub num_envs: usize,
    /// Iteration budget.
    pub iterations: u64,
    /// Stop once this many environment steps were simulated; 0 = no limit.
    pub max_env_steps: u64,
    /// Safety cap on wall-clock seconds; 0 = no limit.
    pub wall_clock_secs: u64,
    /// Write a checkpoint every this many iterations; 0 = final only.
    pub checkpoint_every: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            clip_eps: 0.1,
            entropy_coef: 0.01,
            value_coef: 1.0,
            batch_size: 35_328,
            minibatch_size: 0,
            epochs: 10,
            learning_rate: 3e-4,
            gamma: 1.0,
            gae_lambda: 0.995,
            hidden: vec![512, 512],
            num_envs: 8,
            iterations: 100,
            max_env_steps: 0,
            wall_clock_secs: 0,
            checkpoint_every: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let cfg: Self =
            toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.display().to_string(), msg: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn minibatch(&self) -> usize {
        if self.minibatch_size == 0 {
            self.batch_size
        } else {
            self.minibatch_size
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field, msg: &str| Err(ConfigError::Invalid { field, msg: msg.to_string() });
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps", "must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be > 0");
        }
        if self.batch_size % self.minibatch() != 0 {
            return bad("minibatch_size", "must divide batch_size");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", "must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda", "must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate", "must be > 0");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be > 0");
        }
        if self.hidden.iter().any(|h| *h == 0) {
            return bad("hidden", "layer sizes must be > 0");
        }
        if self.entropy_coef < 0.0 || self.value_coef < 0.0 {
            return bad("entropy_coef", "coefficients must be >= 0");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_selected_configuration() {
        let c = TrainConfig::default();
        assert_eq!((c.clip_eps, c.batch_size, c.entropy_coef), (0.1, 35_328, 0.01));
        assert_eq!(c.hidden, vec![512, 512]);
        assert_eq!(c.gamma, 1.0);
        c.validate().unwrap();
    }

    #[test]
    fn invalid_fields_named() {
        let c = TrainConfig { minibatch_size: 1000, ..Default::default() };
        assert!(matches!(c.validate(), Err(ConfigError::Invalid { field: "minibatch_size", .. })));
        let c = TrainConfig { gamma: 0.0, ..Default::default() };
        assert!(matches!(c.validate(), Err(ConfigError::Invalid { field: "gamma", .. })));
        let c = TrainConfig { clip_eps: 0.0, ..Default::default() };
        assert!(matches!(c.validate(), Err(ConfigError::Invalid { field: "clip_eps", .. })));
    }

    #[test]
    fn toml_partial_override() {
        let c: TrainConfig = toml::from_str("batch_size = 300\nhidden = [16, 16]\n").unwrap();
        assert_eq!(c.batch_size, 300);
        assert_eq!(c.epochs, 10);
        assert!(toml::from_str::<TrainConfig>("bogus = 1").is_err());
    }
}
