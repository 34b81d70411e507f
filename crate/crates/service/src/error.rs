use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

/// An error response rendered as `{"error": ..., "details": ...}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into(), details: Value::Null }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "authentication required")
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    pub fn no_model() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "no model loaded")
    }

    pub fn too_large(limit: usize) -> Self {
        Self::new(StatusCode::PAYLOAD_TOO_LARGE, "request body too large")
            .with_details(json!({ "limit_bytes": limit }))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.message, "details": self.details });
        (self.status, Json(body)).into_response()
    }
}

impl From<cardiodx_core::Error> for ApiError {
    fn from(e: cardiodx_core::Error) -> Self {
        use cardiodx_core::Error as E;
        match e {
            E::MissingColumns(cols) => ApiError::unprocessable("header is missing required columns")
                .with_details(json!({ "missing": cols })),
            E::EmptyInput => ApiError::unprocessable("upload contains no data rows"),
            E::Csv(_) | E::InvalidArgument(_) | E::ColumnCount { .. } => {
                ApiError::unprocessable(e.to_string())
            }
            other => ApiError::internal(other.to_string()),
        }
    }
}
