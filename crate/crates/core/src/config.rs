//! Runtime settings, read from the JSON file named by `VERBALARM_CONFIG`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::Defaults;
use crate::grasp::GraspConfig;
use crate::sim::{CameraSpec, DEFAULT_TICK_RATE_HZ};

pub const CONFIG_ENV: &str = "VERBALARM_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("bad config: {0}")]
    Parse(String),
}

/// Every field is optional in the file; missing ones keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Segmentation, CEM and diverse-menu settings, including `eps` and `k`.
    pub grasp: GraspConfig,
    /// Overrides the chain file's default path magnitudes.
    pub defaults: Option<Defaults>,
    pub tick_rate_hz: f64,
    /// Wall-clock pacing of streamed ticks: 1 is real time, 0 streams as
    /// fast as possible.
    pub playback_speed: f64,
    pub seed: u64,
    /// Overrides the world file's camera for grasp planning.
    pub camera: Option<CameraSpec>,
    pub world: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub chain: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            grasp: GraspConfig::default(),
            defaults: None,
            tick_rate_hz: DEFAULT_TICK_RATE_HZ,
            playback_speed: 1.0,
            seed: 0,
            camera: None,
            world: None,
            lexicon: None,
            chain: None,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    /// The file named by `VERBALARM_CONFIG`, or defaults when unset.
    pub fn from_env() -> Result<Self, ConfigError> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(p),
            _ => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tick_rate_hz > 0.0 && self.tick_rate_hz.is_finite()) {
            return Err(ConfigError::Parse("tick_rate_hz must be positive".into()));
        }
        if !(self.playback_speed >= 0.0 && self.playback_speed.is_finite()) {
            return Err(ConfigError::Parse("playback_speed must be non-negative".into()));
        }
        if !(self.grasp.eps >= 0.0) || self.grasp.k == 0 {
            return Err(ConfigError::Parse("eps must be non-negative and k positive".into()));
        }
        self.grasp
            .cem
            .validate()
            .map_err(|e| ConfigError::Parse(e.to_string()))?;
        if let Some(d) = &self.defaults {
            if !(d.cartesian_m > 0.0 && d.joint_rad > 0.0) {
                return Err(ConfigError::Parse("default path magnitudes must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = Config::from_json(r#"{"grasp": {"eps": 0.08, "k": 3}, "tick_rate_hz": 100}"#).unwrap();
        assert_eq!(cfg.grasp.eps, 0.08);
        assert_eq!(cfg.grasp.k, 3);
        assert_eq!(cfg.grasp.ransac_iterations, 500);
        assert_eq!(cfg.tick_rate_hz, 100.0);
        assert_eq!(cfg.playback_speed, 1.0);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::from_json(r#"{"tick_rate_hz": 0}"#).is_err());
        assert!(Config::from_json(r#"{"grasp": {"k": 0}}"#).is_err());
        assert!(Config::from_json(r#"{"grasp": {"cem": {"population": 0}}}"#).is_err());
        assert!(Config::from_json("[").is_err());
    }

    #[test]
    fn round_trip() {
        let cfg = Config {
            seed: 9,
            ..Config::default()
        };
        let back = Config::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
