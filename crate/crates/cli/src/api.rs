//! Error envelope shared by the HTTP service and the CLI.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use landsig_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    SessionClosed,
    IncompleteCluster,
    EmptySignature,
    NoZonesForLabel,
    IoError,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 7] = [
        ErrorCode::BadRequest,
        ErrorCode::NotFound,
        ErrorCode::SessionClosed,
        ErrorCode::IncompleteCluster,
        ErrorCode::EmptySignature,
        ErrorCode::NoZonesForLabel,
        ErrorCode::IoError,
    ];

    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::SessionClosed => StatusCode::CONFLICT,
            ErrorCode::IncompleteCluster
            | ErrorCode::EmptySignature
            | ErrorCode::NoZonesForLabel => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::IoError => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadRequest, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::IoError, message)
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error envelope serializes")
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Io { path, .. } => {
                ApiError::io(message).with_detail(json!({ "path": path.display().to_string() }))
            }
            Error::InvalidStore(_) => ApiError::io(message),
            Error::EmptySignature => ApiError::new(ErrorCode::EmptySignature, message),
            Error::SessionClosed(_) => ApiError::new(ErrorCode::SessionClosed, message),
            Error::IncompleteCluster { hours } => {
                ApiError::new(ErrorCode::IncompleteCluster, message)
                    .with_detail(json!({ "empty_hours": hours }))
            }
            Error::NoZonesForLabel(label) => ApiError::new(ErrorCode::NoZonesForLabel, message)
                .with_detail(json!({ "label": label })),
            Error::IncompleteZone { label, hours } => ApiError::bad_request(message)
                .with_detail(json!({ "label": label, "empty_hours": hours })),
            Error::DegenerateBox(_)
            | Error::OutOfRange(_)
            | Error::MalformedRecord(_)
            | Error::EmptyDataset
            | Error::InvalidTemplate(_)
            | Error::DegenerateRing(_)
            | Error::InvalidZone { .. }
            | Error::InvalidProfile(_)
            | Error::InvalidPolicy(_)
            | Error::UnknownLabel(_)
            | Error::InvalidCellSize(_)
            | Error::Json(_) => ApiError::bad_request(message),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::io(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;
