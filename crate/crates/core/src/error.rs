use std::path::PathBuf;

use crate::model::LandUseLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate bounding box: {0}")]
    DegenerateBox(String),
    #[error("coordinate out of range: {0}")]
    OutOfRange(String),
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset contains no geo-located records")]
    EmptyDataset,
    #[error("signature has no events in any hour")]
    EmptySignature,
    #[error("zone {label} has no events at hour(s) {hours:?}")]
    IncompleteZone {
        label: LandUseLabel,
        hours: Vec<usize>,
    },
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("session is closed ({0})")]
    SessionClosed(String),
    #[error("cluster has no events at hour(s) {hours:?}")]
    IncompleteCluster { hours: Vec<usize> },
    #[error("degenerate ring: {0}")]
    DegenerateRing(String),
    #[error("invalid zone {id}: {reason}")]
    InvalidZone { id: String, reason: String },
    #[error("no zones loaded for label {0}")]
    NoZonesForLabel(LandUseLabel),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid growth policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid store file: {0}")]
    InvalidStore(String),
    #[error("unknown land-use label {0:?}")]
    UnknownLabel(String),
    #[error("invalid cell size {0}")]
    InvalidCellSize(f64),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
