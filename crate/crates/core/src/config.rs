//! Run configuration: one JSON document, overridden by command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::FixedOffset;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::LoopConfig;
use crate::ingest::{EventWindow, RecordFilter};
use crate::metrics::{BoundingBox, CategoryGranularity, CompareOptions, DistanceMetric, TripRule};
use crate::provider::HttpProviderConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSettings {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub max_in_flight: usize,
    pub max_attempts: u32,
    pub timeout_secs: u64,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        let http = HttpProviderConfig::default();
        Self {
            base_url: http.base_url,
            model: http.model,
            api_key_env: "ELLMOB_API_KEY".into(),
            max_in_flight: http.max_in_flight,
            max_attempts: http.max_attempts,
            timeout_secs: http.timeout.as_secs(),
        }
    }
}

impl ProviderSettings {
    pub fn http_config(&self, seed: u64) -> HttpProviderConfig {
        HttpProviderConfig {
            base_url: self.base_url.clone(),
            model: self.model.clone(),
            api_key: std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty()),
            max_in_flight: self.max_in_flight,
            max_attempts: self.max_attempts,
            timeout: Duration::from_secs(self.timeout_secs),
            seed,
            ..HttpProviderConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSettings {
    /// UTC offset of local time, e.g. `+09:00`.
    pub timezone: String,
    pub short_window_days: i64,
    /// Evaluation box; defaults to the tight box around the truth points.
    pub bbox: Option<BoundingBox>,
    pub grid_size: usize,
    pub cd_granularity: CategoryGranularity,
    pub distance: DistanceMetric,
    pub trip_rule: TripRule,
    pub filter: RecordFilter,
    /// Generate for at most this many users, chosen with the run seed.
    pub sample_users: Option<usize>,
}

impl Default for DataSettings {
    fn default() -> Self {
        Self {
            timezone: "+09:00".into(),
            short_window_days: 7,
            bbox: None,
            grid_size: 10,
            cd_granularity: CategoryGranularity::Subcategory,
            distance: DistanceMetric::Haversine,
            trip_rule: TripRule::DistinctPoiOrCell,
            filter: RecordFilter::default(),
            sample_users: None,
        }
    }
}

impl DataSettings {
    pub fn tz(&self) -> Result<FixedOffset, ConfigError> {
        self.timezone
            .parse()
            .map_err(|_| ConfigError::Invalid(format!("timezone {:?} is not a UTC offset like +09:00", self.timezone)))
    }

    pub fn compare_options(&self) -> CompareOptions {
        CompareOptions {
            granularity: self.cd_granularity,
            distance: self.distance,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSettings {
    pub templates_dir: Option<PathBuf>,
    /// Where constructed event contexts are cached by input hash.
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub provider: ProviderSettings,
    #[serde(rename = "loop")]
    pub loop_: LoopConfig,
    pub data: DataSettings,
    pub event: Option<EventWindow>,
    pub paths: PathSettings,
    pub seed: u64,
    /// Pseudonymization salt; the decimal seed when absent.
    pub salt: Option<String>,
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    /// Loads a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut cfg.paths.templates_dir);
        resolve(base, &mut cfg.paths.cache_dir);
        Ok(cfg)
    }

    pub fn salt(&self) -> String {
        self.salt.clone().unwrap_or_else(|| self.seed.to_string())
    }

    /// Checks the invariants that do not depend on the subcommand.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.loop_.max_iterations == 0 {
            return Err(ConfigError::Invalid("loop.max_iterations must be at least 1".into()));
        }
        if self.data.grid_size == 0 {
            return Err(ConfigError::Invalid("data.grid_size must be at least 1".into()));
        }
        if self.data.short_window_days < 0 {
            return Err(ConfigError::Invalid("data.short_window_days must be nonnegative".into()));
        }
        if self.provider.max_in_flight == 0 || self.provider.max_attempts == 0 {
            return Err(ConfigError::Invalid(
                "provider.max_in_flight and provider.max_attempts must be at least 1".into(),
            ));
        }
        self.data.tz()?;
        if let Some(b) = &self.data.bbox {
            b.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if let Some(w) = &self.event {
            w.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if let Some(dir) = &self.paths.templates_dir {
            if !dir.is_dir() {
                return Err(ConfigError::Invalid(format!(
                    "paths.templates_dir {} does not exist",
                    dir.display()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.loop_.max_iterations, 3);
        assert_eq!(cfg.data.grid_size, 10);
        assert_eq!(cfg.data.tz().unwrap(), FixedOffset::east_opt(9 * 3600).unwrap());
        assert_eq!(cfg.salt(), "0");
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_sections_and_unknown_keys() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"loop":{"max_iterations":5},"data":{"trip_rule":"distinct_poi"},"seed":9}"#).unwrap();
        assert_eq!(cfg.loop_.max_iterations, 5);
        assert!(!cfg.loop_.ablate_internal);
        assert_eq!(cfg.data.trip_rule, TripRule::DistinctPoi);
        assert!(serde_json::from_str::<RunConfig>(r#"{"lop":{}}"#).is_err());
    }

    #[test]
    fn invariants() {
        let mut cfg = RunConfig::default();
        cfg.loop_.max_iterations = 0;
        assert!(cfg.validate().is_err());
        cfg = RunConfig::default();
        cfg.data.grid_size = 0;
        assert!(cfg.validate().is_err());
        cfg = RunConfig::default();
        cfg.data.timezone = "Asia/Tokyo".into();
        assert!(cfg.validate().is_err());
        cfg = RunConfig::default();
        cfg.paths.templates_dir = Some("/definitely/not/here".into());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("tpl")).unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"paths":{"templates_dir":"tpl"}}"#).unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.paths.templates_dir.as_deref(), Some(dir.path().join("tpl").as_path()));
        cfg.validate().unwrap();
    }
}
