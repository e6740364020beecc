use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::Serialize;
use staticembed_core::EmbedError;

/// Error response, always rendered as `{"error": code, "message": text}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn overloaded() -> Self {
        Self::new(StatusCode::TOO_MANY_REQUESTS, "overloaded", "too many concurrent requests")
    }

    pub fn not_loaded() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "model_not_loaded", "model is not loaded yet")
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn body_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&Body { error: self.code, message: &self.message })
            .expect("error body serializes")
    }
}

impl From<EmbedError> for ApiError {
    fn from(e: EmbedError) -> Self {
        let code = match e {
            EmbedError::EmptyInput => "empty_input",
            EmbedError::DegenerateWeights => "degenerate_weights",
            EmbedError::ZeroVector => "zero_vector",
            EmbedError::EmptyBatch => "empty_batch",
            EmbedError::ShapeError(_) | EmbedError::TokenOutOfRange { .. } | EmbedError::InvalidConfig(_) => {
                return Self::internal(e.to_string())
            }
        };
        Self::new(StatusCode::BAD_REQUEST, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = self.body_bytes();
        (self.status, [(axum::http::header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}
