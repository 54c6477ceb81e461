//! Endpoint handlers. Access control has already happened in the route
//! guard by the time any of these run; each reads what it needs from the
//! [`Caller`](crate::routes::Caller) extension.

pub mod assessments;
pub mod life_story;
pub mod memories;
pub mod people;
pub mod sessions;

use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use recuerdame_core::domain::PartialDate;
use recuerdame_core::ids::PatientId;
use recuerdame_core::report::{export_file_name, RenderedDocument};
use serde::Serialize;

use crate::error::ApiError;

pub type ApiResult<T = Response> = Result<T, ApiError>;

/// Runs store work off the async executor.
pub async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> ApiResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(format!("worker task failed: {e}")))?
}

pub fn etag(version: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{version}\"")).expect("digits are a valid header")
}

/// A single record with its version as the ETag.
pub fn versioned<T: Serialize>(status: StatusCode, value: &T, version: u64) -> Response {
    let mut r = (status, Json(value)).into_response();
    r.headers_mut().insert(header::ETAG, etag(version));
    r
}

pub fn json<T: Serialize>(status: StatusCode, value: &T) -> Response {
    (status, Json(value)).into_response()
}

pub const DIGEST_HEADER: &str = "x-structural-digest";

pub fn pdf(doc: RenderedDocument, patient: PatientId, today: chrono::NaiveDate) -> Response {
    let name = export_file_name(patient, doc.document_kind, today);
    let headers = [
        (header::CONTENT_TYPE, HeaderValue::from_static("application/pdf")),
        (
            header::CONTENT_DISPOSITION,
            HeaderValue::from_str(&format!("attachment; filename=\"{name}\"")).expect("ascii file name"),
        ),
        (
            header::HeaderName::from_static(DIGEST_HEADER),
            HeaderValue::from_str(&doc.structural_digest).expect("hex digest"),
        ),
    ];
    (headers, doc.bytes).into_response()
}

/// `YYYY`, `YYYY-MM` or `YYYY-MM-DD`.
pub fn parse_partial_date(field: &str, s: &str) -> ApiResult<PartialDate> {
    let bad = || {
        ApiError::bad_request(
            "BAD_QUERY",
            format!("{field} must be YYYY, YYYY-MM or YYYY-MM-DD, got {s}"),
        )
    };
    let parts: Vec<i64> = s
        .trim()
        .split('-')
        .map(|p| p.parse::<i64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let date = match parts[..] {
        [y] => PartialDate::year(y),
        [y, m] => PartialDate::ym(y, m),
        [y, m, d] => PartialDate::ymd(y, m, d),
        _ => return Err(bad()),
    };
    date.map_err(|_| bad())
}

/// Splits a comma-separated query value, dropping empty items.
pub fn list(value: &Option<String>) -> impl Iterator<Item = &str> {
    value
        .as_deref()
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
}
