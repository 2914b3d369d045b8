//! On-disk artifacts written by the CLI.

use std::fs;
use std::path::Path;

use landsig_core::cluster_builder::{Cluster, DiscardReason};
use landsig_core::BoundingBox;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::api::{ApiError, ApiResult};

pub const CLUSTERS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscardedSeed {
    pub seed: BoundingBox,
    pub reason: DiscardReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClustersFile {
    pub version: u32,
    pub dataset: String,
    pub clusters: Vec<Cluster>,
    #[serde(default)]
    pub discarded: Vec<DiscardedSeed>,
}

impl ClustersFile {
    pub fn new(dataset: impl Into<String>) -> Self {
        ClustersFile {
            version: CLUSTERS_VERSION,
            dataset: dataset.into(),
            clusters: Vec::new(),
            discarded: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> ApiResult<Self> {
        let file: ClustersFile = read_json(path)?;
        if file.version != CLUSTERS_VERSION {
            return Err(ApiError::bad_request(format!(
                "{}: unsupported clusters file version {}",
                path.display(),
                file.version
            )));
        }
        Ok(file)
    }
}

pub fn read_text(path: &Path) -> ApiResult<String> {
    fs::read_to_string(path).map_err(|e| {
        ApiError::from(landsig_core::Error::Io {
            path: path.into(),
            source: e,
        })
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> ApiResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text)
        .map_err(|e| ApiError::bad_request(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> ApiResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_at(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_at(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> ApiResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    write_text(path, &text)
}

pub fn io_at(path: &Path, e: std::io::Error) -> ApiError {
    ApiError::from(landsig_core::Error::Io {
        path: path.into(),
        source: e,
    })
}
