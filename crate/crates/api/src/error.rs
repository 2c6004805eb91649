use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use community_pulse_core::analytics::AnalyticsError;
use community_pulse_core::ingest::IngestError;
use community_pulse_core::recommend::RecommendError;
use community_pulse_core::store::StoreError;
use serde::{Deserialize, Serialize};

/// Machine-readable error codes. This is the complete set the service emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    InvalidRepo,
    InvalidWindow,
    InvalidThreshold,
    InvalidQuery,
    InvalidState,
    InvalidBody,
    InvalidUntil,
    NotIngested,
    NotFound,
    IllegalTransition,
    RepoMismatch,
    Unauthorized,
    BadFixture,
    RateLimited,
    UpstreamError,
    StorageError,
}

impl ErrorCode {
    pub const ALL: [Self; 16] = [
        Self::InvalidRepo,
        Self::InvalidWindow,
        Self::InvalidThreshold,
        Self::InvalidQuery,
        Self::InvalidState,
        Self::InvalidBody,
        Self::InvalidUntil,
        Self::NotIngested,
        Self::NotFound,
        Self::IllegalTransition,
        Self::RepoMismatch,
        Self::Unauthorized,
        Self::BadFixture,
        Self::RateLimited,
        Self::UpstreamError,
        Self::StorageError,
    ];

    pub fn status(self) -> StatusCode {
        match self {
            Self::InvalidRepo
            | Self::InvalidWindow
            | Self::InvalidThreshold
            | Self::InvalidQuery
            | Self::InvalidState
            | Self::InvalidBody
            | Self::InvalidUntil => StatusCode::BAD_REQUEST,
            Self::NotIngested | Self::NotFound => StatusCode::NOT_FOUND,
            Self::IllegalTransition | Self::RepoMismatch => StatusCode::CONFLICT,
            Self::Unauthorized => StatusCode::UNAUTHORIZED,
            Self::BadFixture => StatusCode::UNPROCESSABLE_ENTITY,
            Self::RateLimited => StatusCode::TOO_MANY_REQUESTS,
            Self::UpstreamError => StatusCode::BAD_GATEWAY,
            Self::StorageError => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// JSON error body: `{status, code, message}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            status: code.status().as_u16(),
            code,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        let code = match e {
            AnalyticsError::InvalidWindow(_) => ErrorCode::InvalidWindow,
            AnalyticsError::InvalidThreshold { .. } => ErrorCode::InvalidThreshold,
        };
        Self::new(code, e.to_string())
    }
}

impl From<RecommendError> for ApiError {
    fn from(e: RecommendError) -> Self {
        let code = match e {
            RecommendError::NotFound(_) => ErrorCode::NotFound,
            RecommendError::IllegalTransition { .. } => ErrorCode::IllegalTransition,
            RecommendError::InvalidSnooze { .. } => ErrorCode::InvalidUntil,
        };
        Self::new(code, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let code = match e {
            StoreError::RepoMismatch { .. } => ErrorCode::RepoMismatch,
            _ => ErrorCode::StorageError,
        };
        Self::new(code, e.to_string())
    }
}

/// Errors from the live API source.
pub(crate) fn upstream(e: IngestError) -> ApiError {
    let code = match e {
        IngestError::Auth(_) => ErrorCode::Unauthorized,
        IngestError::RateLimited { .. } => ErrorCode::RateLimited,
        IngestError::NotFound(_) => ErrorCode::NotFound,
        _ => ErrorCode::UpstreamError,
    };
    ApiError::new(code, e.to_string())
}
