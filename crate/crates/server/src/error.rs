use axum::extract::multipart::MultipartError;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use leaftutor_core::api::{ErrorBody, ErrorDetail};
use leaftutor_core::Error;

/// An error rendered as `{"error": {"code", "message"}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.to_owned(),
            message: message.into(),
        }
    }
}

pub fn status_for(err: &Error) -> StatusCode {
    match err {
        Error::Unauthorized => StatusCode::UNAUTHORIZED,
        Error::Forbidden(_) => StatusCode::FORBIDDEN,
        Error::NotFound { .. } | Error::UnknownSession(_) | Error::UnknownAssignment(_) => StatusCode::NOT_FOUND,
        Error::Conflict { .. } | Error::Busy(_) => StatusCode::CONFLICT,
        Error::UnsupportedKind(_)
        | Error::Validation(_)
        | Error::EmptyQuery
        | Error::InvalidJob(_)
        | Error::UnknownProfile(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::NotText => StatusCode::UNSUPPORTED_MEDIA_TYPE,
        Error::TooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
        Error::ProviderUnavailable(_) | Error::ScriptMiss(_) => StatusCode::BAD_GATEWAY,
        Error::ProviderTimeout(_) => StatusCode::GATEWAY_TIMEOUT,
        Error::ToolchainMissing(_) => StatusCode::SERVICE_UNAVAILABLE,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let status = status_for(&err);
        if status.is_server_error() {
            tracing::warn!(code = err.code(), "{err}");
        }
        Self::new(status, err.code(), err.to_string())
    }
}

fn from_rejection(status: StatusCode, text: String) -> ApiError {
    if status == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::new(status, "TOO_LARGE", text)
    } else {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "VALIDATION", text)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        from_rejection(r.status(), r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        from_rejection(r.status(), r.body_text())
    }
}

impl From<MultipartError> for ApiError {
    fn from(e: MultipartError) -> Self {
        from_rejection(e.status(), e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: ErrorDetail {
                code: self.code,
                message: self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}
