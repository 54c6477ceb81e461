use axum::extract::State;
use axum::http::StatusCode;
use axum::Extension;
use chrono::NaiveDate;
use recuerdame_core::domain::{ReportDraft, SessionPatch, SessionPlan};
use recuerdame_core::ids::SessionId;
use recuerdame_core::service::Amendment;
use serde::Deserialize;
use serde_json::json;

use super::{blocking, json, pdf, versioned, ApiResult};
use crate::calendar;
use crate::error::ApiError;
use crate::extract::{JsonBody, QueryParams};
use crate::routes::Caller;
use crate::AppState;

pub async fn list_sessions(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult {
    Ok(json(StatusCode::OK, &app.clinic.list_sessions(caller.patient()?)?))
}

pub async fn create_session(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(plan): JsonBody<SessionPlan>,
) -> ApiResult {
    let pid = caller.patient()?;
    let s = blocking(move || Ok(app.clinic.plan_session(pid, plan)?)).await?;
    Ok(versioned(StatusCode::CREATED, &s, s.record_version))
}

pub async fn get_session(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult {
    let s = app.clinic.session(caller.target::<SessionId>()?)?;
    Ok(versioned(StatusCode::OK, &s, s.record_version))
}

pub async fn patch_session(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(patch): JsonBody<SessionPatch>,
) -> ApiResult {
    let (id, expected) = (caller.target::<SessionId>()?, caller.expected()?);
    let s = blocking(move || Ok(app.clinic.update_session(id, expected, patch)?)).await?;
    Ok(versioned(StatusCode::OK, &s, s.record_version))
}

pub async fn start_session(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult {
    let (id, expected) = (caller.target::<SessionId>()?, caller.expected()?);
    let s = blocking(move || Ok(app.clinic.start_session(id, expected)?)).await?;
    Ok(versioned(StatusCode::OK, &s, s.record_version))
}

pub async fn cancel_session(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult {
    let (id, expected) = (caller.target::<SessionId>()?, caller.expected()?);
    let s = blocking(move || Ok(app.clinic.cancel_session(id, expected)?)).await?;
    Ok(versioned(StatusCode::OK, &s, s.record_version))
}

/// `If-Match` carries the session version. A `modify_memory` body carries
/// the memory's own version in `memory_record_version`.
pub async fn amend_session(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(amendment): JsonBody<Amendment>,
) -> ApiResult {
    let (id, expected) = (caller.target::<SessionId>()?, caller.expected()?);
    let outcome = blocking(move || Ok(app.clinic.amend_memory_in_session(id, expected, amendment)?)).await?;
    Ok(versioned(StatusCode::OK, &outcome, outcome.session.record_version))
}

pub async fn end_session(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(draft): JsonBody<ReportDraft>,
) -> ApiResult {
    let (id, expected) = (caller.target::<SessionId>()?, caller.expected()?);
    let author = caller.therapist()?.id;
    let (session, report) = blocking(move || Ok(app.clinic.end_session(id, expected, author, &draft)?)).await?;
    Ok(versioned(
        StatusCode::OK,
        &json!({ "session": session, "report": report }),
        session.record_version,
    ))
}

pub async fn get_report(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult {
    Ok(json(
        StatusCode::OK,
        &app.clinic.session_report(caller.target::<SessionId>()?)?,
    ))
}

pub async fn get_report_pdf(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult {
    let (id, pid) = (caller.target::<SessionId>()?, caller.patient()?);
    let clinic = app.clinic.clone();
    let doc = blocking(move || Ok(clinic.render_session_report(id)?)).await?;
    Ok(pdf(doc, pid, app.clinic.now().date_naive()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalendarQuery {
    from: Option<String>,
    to: Option<String>,
    month: Option<String>,
}

fn day(field: &str, s: &str) -> ApiResult<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|_| ApiError::bad_request("BAD_QUERY", format!("{field} must be YYYY-MM-DD, got {s}")))
}

impl CalendarQuery {
    /// `from`/`to` (inclusive days), or `month=YYYY-MM`, or the current month.
    fn window(&self, today: NaiveDate) -> ApiResult<(NaiveDate, NaiveDate)> {
        match (&self.month, &self.from, &self.to) {
            (Some(m), None, None) => {
                let bad = || ApiError::bad_request("BAD_QUERY", format!("month must be YYYY-MM, got {m}"));
                let (y, mo) = m.trim().split_once('-').ok_or_else(bad)?;
                let (y, mo) = (y.parse().map_err(|_| bad())?, mo.parse().map_err(|_| bad())?);
                calendar::month_bounds(y, mo).ok_or_else(bad)
            }
            (None, Some(f), Some(t)) => {
                let (f, t) = (day("from", f)?, day("to", t)?);
                if f > t {
                    return Err(ApiError::bad_request("BAD_QUERY", "from is after to"));
                }
                Ok((f, t))
            }
            (None, None, None) => Ok(calendar::month_of(today)),
            _ => Err(ApiError::bad_request(
                "BAD_QUERY",
                "give either month, or both from and to",
            )),
        }
    }
}

pub async fn calendar(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    QueryParams(q): QueryParams<CalendarQuery>,
) -> ApiResult {
    let pid = caller.patient()?;
    let (from, to) = q.window(app.clinic.now().date_naive())?;
    let patient = app.clinic.patient(pid)?;
    let sessions = app.clinic.list_sessions(pid)?;
    Ok(json(StatusCode::OK, &calendar::entries(&patient, &sessions, from, to)))
}
