use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown pair: {0}")]
    UnknownPair(String),
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("supersedes must name an earlier record of the same reviewer and pair: {0}")]
    InvalidSupersedes(u64),
    #[error("reviewer id is required")]
    MissingReviewer,
    #[error("not found")]
    NotFound,
    #[error(transparent)]
    Storage(#[from] leakcheck_core::Error),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownPair(_) | ServiceError::NotFound => StatusCode::NOT_FOUND,
            ServiceError::InvalidLabel(_) | ServiceError::InvalidSupersedes(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::MissingReviewer => StatusCode::BAD_REQUEST,
            ServiceError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "ok": false, "error": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}
