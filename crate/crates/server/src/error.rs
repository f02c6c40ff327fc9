use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::multipart::MultipartError;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tae_core::Error;

/// Wire form of every failed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiErrorBody {
    pub code: String,
    pub message: String,
    pub detail: Value,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub error: Error,
}

pub fn status_for(e: &Error) -> StatusCode {
    use Error::*;
    match e {
        UnknownClass(_) | UnknownTrack(_) | UnknownClip(_) | UnknownAsset(_) | UnknownAnimation(_)
        | UnknownPreset(_) | UnknownTool(_) | UnknownProject(_) | UnknownSession(_)
        | UnknownSuggestion(_) => StatusCode::NOT_FOUND,
        DuplicateClass(_) | DuplicateId(_) | Overlap { .. } | AssetInUse(_) | OrderIndexTaken(_)
        | SessionBusy | WrongState { .. } | SuggestionNotPending(_) | StaleSuggestion(_) => StatusCode::CONFLICT,
        Provider(_) => StatusCode::BAD_GATEWAY,
        Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl From<Error> for ApiError {
    fn from(error: Error) -> Self {
        Self { status: status_for(&error), error }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Error::SchemaViolation(r.body_text()).into()
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        Error::SchemaViolation(r.body_text()).into()
    }
}

impl From<MultipartError> for ApiError {
    fn from(r: MultipartError) -> Self {
        Error::SchemaViolation(r.body_text()).into()
    }
}

impl ApiError {
    pub fn body(&self) -> ApiErrorBody {
        ApiErrorBody {
            code: self.error.code().to_string(),
            message: self.error.to_string(),
            detail: self.error.detail(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.error.code(), "{}", self.error);
        }
        (self.status, Json(self.body())).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
