//! Service configuration file (TOML).
//!
//! ```toml
//! port = 8080
//! data_dir = "data"
//! template = "template.json"
//!
//! [policy]
//! step_deg = 0.0025
//!
//! [[datasets]]
//! store = "brisbane"
//! zones = "brisbane-zones.geojson"
//! ```
//!
//! Relative paths are resolved against `data_dir`, which is itself resolved
//! against the directory holding the config file.

use std::path::{Path, PathBuf};

use landsig_core::classify::DEFAULT_NEAR_MISS_MARGIN;
use landsig_core::cluster_builder::GrowthPolicy;
use landsig_core::overlap::OverlapDefinition;
use landsig_core::spatial_index::DEFAULT_CELL_SIZE_DEG;
use serde::Deserialize;

use crate::api::{ApiError, ApiResult};
use crate::files::read_text;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default)]
    pub data_dir: PathBuf,
    #[serde(default)]
    pub template: Option<PathBuf>,
    #[serde(default)]
    pub policy: GrowthPolicy,
    #[serde(default = "default_margin")]
    pub near_miss_margin: f64,
    #[serde(default = "default_cell_size")]
    pub cell_size_deg: f64,
    #[serde(default)]
    pub overlap_definition: OverlapDefinition,
    #[serde(default)]
    pub serve_static: bool,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
    #[serde(default)]
    pub datasets: Vec<DatasetConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Defaults to the name in the store's manifest.
    #[serde(default)]
    pub name: Option<String>,
    pub store: PathBuf,
    /// Overrides the offset recorded at ingest.
    #[serde(default)]
    pub tz_offset_minutes: Option<i32>,
    #[serde(default)]
    pub zones: Option<PathBuf>,
    #[serde(default)]
    pub label_map: Option<PathBuf>,
}

fn default_bind() -> String {
    "127.0.0.1".into()
}

fn default_port() -> u16 {
    8080
}

fn default_margin() -> f64 {
    DEFAULT_NEAR_MISS_MARGIN
}

fn default_cell_size() -> f64 {
    DEFAULT_CELL_SIZE_DEG
}

impl Default for ServiceConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config is valid")
    }
}

impl ServiceConfig {
    pub fn parse(text: &str) -> ApiResult<Self> {
        let cfg: ServiceConfig =
            toml::from_str(text).map_err(|e| ApiError::bad_request(format!("config: {e}")))?;
        cfg.policy.validate()?;
        if cfg.near_miss_margin.is_nan() || cfg.near_miss_margin < 0.0 {
            return Err(ApiError::bad_request(
                "config: near_miss_margin must be non-negative",
            ));
        }
        if cfg.serve_static && cfg.static_dir.is_none() {
            return Err(ApiError::bad_request(
                "config: serve_static needs static_dir",
            ));
        }
        Ok(cfg)
    }

    /// Reads the file and makes `data_dir` absolute relative to it.
    pub fn load(path: &Path) -> ApiResult<Self> {
        let mut cfg = Self::parse(&read_text(path)?)?;
        if cfg.data_dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.data_dir = base.join(&cfg.data_dir);
        }
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.data_dir.join(p)
        }
    }
}
