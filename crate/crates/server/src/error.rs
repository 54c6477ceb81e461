use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use recuerdame_core::error::{Error, ErrorClass, FieldError};
use serde::Serialize;

use crate::auth::AuthFailure;

/// Everything a handler or the guard can fail with.
#[derive(Debug)]
pub enum ApiError {
    Domain(Error),
    Unauthenticated(AuthFailure),
    /// Deliberately carries nothing: a 403 must not reveal patient data.
    Forbidden,
    PreconditionRequired,
    BadRequest {
        code: &'static str,
        message: String,
    },
    PayloadTooLarge,
    NoRoute,
    Internal(String),
}

#[derive(Serialize)]
struct Body<'a> {
    code: &'a str,
    message: String,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    field_errors: &'a [FieldError],
}

pub fn status_for(class: ErrorClass) -> StatusCode {
    match class {
        ErrorClass::Validation => StatusCode::BAD_REQUEST,
        ErrorClass::NotFound => StatusCode::NOT_FOUND,
        ErrorClass::Conflict => StatusCode::CONFLICT,
        ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl ApiError {
    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::BadRequest {
            code,
            message: message.into(),
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Domain(e) => status_for(e.class()),
            ApiError::Unauthenticated(_) => StatusCode::UNAUTHORIZED,
            ApiError::Forbidden => StatusCode::FORBIDDEN,
            ApiError::PreconditionRequired => StatusCode::PRECONDITION_REQUIRED,
            ApiError::BadRequest { .. } => StatusCode::BAD_REQUEST,
            ApiError::PayloadTooLarge => StatusCode::PAYLOAD_TOO_LARGE,
            ApiError::NoRoute => StatusCode::NOT_FOUND,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Domain(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        let body = match &self {
            ApiError::Forbidden => return status.into_response(),
            ApiError::Domain(e) if e.class() == ErrorClass::Internal => {
                tracing::error!(error = %e, "request failed");
                Body {
                    code: e.code(),
                    message: "internal error".to_string(),
                    field_errors: &[],
                }
            }
            ApiError::Domain(e) => Body {
                code: e.code(),
                message: e.to_string(),
                field_errors: e.field_errors(),
            },
            ApiError::Unauthenticated(why) => Body {
                code: "UNAUTHENTICATED",
                message: format!("{why:?}"),
                field_errors: &[],
            },
            ApiError::PreconditionRequired => Body {
                code: "PRECONDITION_REQUIRED",
                message: "this request needs an If-Match header with the record version".to_string(),
                field_errors: &[],
            },
            ApiError::BadRequest { code, message } => Body {
                code,
                message: message.clone(),
                field_errors: &[],
            },
            ApiError::PayloadTooLarge => Body {
                code: "PAYLOAD_TOO_LARGE",
                message: "request body exceeds the configured limit".to_string(),
                field_errors: &[],
            },
            ApiError::NoRoute => Body {
                code: "NO_ROUTE",
                message: "no such endpoint".to_string(),
                field_errors: &[],
            },
            ApiError::Internal(msg) => {
                tracing::error!(error = %msg, "request failed");
                Body {
                    code: "INTERNAL",
                    message: "internal error".to_string(),
                    field_errors: &[],
                }
            }
        };
        let mut response = (status, axum::Json(body)).into_response();
        if status == StatusCode::UNAUTHORIZED {
            response
                .headers_mut()
                .insert(header::WWW_AUTHENTICATE, HeaderValue::from_static("Bearer"));
        }
        response
    }
}
