use axum::extract::State;
use axum::http::StatusCode;
use axum::response::Response;
use axum::Extension;
use recuerdame_core::catalog::RelatedPersonSort;
use recuerdame_core::domain::{PatientDraft, PatientPatch, RelatedPersonDraft, RelatedPersonPatch};
use recuerdame_core::ids::{OutboxId, RelatedPersonId};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{blocking, json, versioned, ApiResult};
use crate::extract::{JsonBody, QueryParams};
use crate::routes::Caller;
use crate::AppState;

pub async fn health() -> Response {
    json(StatusCode::OK, &json!({ "status": "ok" }))
}

pub async fn me(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult {
    let me = caller.therapist()?.clone();
    let patients = app.clinic.patients_of(me.id).len();
    Ok(json(
        StatusCode::OK,
        &json!({ "id": me.id, "display_name": me.display_name, "email": me.email, "patient_count": patients }),
    ))
}

pub async fn list_patients(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult {
    let id = caller.therapist()?.id;
    Ok(json(StatusCode::OK, &app.clinic.patients_of(id)))
}

/// The creating therapist is always among the assigned ones, otherwise the
/// new record would be unreachable for them.
pub async fn create_patient(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(mut draft): JsonBody<PatientDraft>,
) -> ApiResult {
    let me = caller.therapist()?.id;
    if !draft.assigned_therapists.contains(&me) {
        draft.assigned_therapists.push(me);
    }
    let p = blocking(move || Ok(app.clinic.create_patient(draft)?)).await?;
    Ok(versioned(StatusCode::CREATED, &p, p.record_version))
}

pub async fn get_patient(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult {
    let p = app.clinic.patient(caller.patient()?)?;
    Ok(versioned(StatusCode::OK, &p, p.record_version))
}

pub async fn patch_patient(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(patch): JsonBody<PatientPatch>,
) -> ApiResult {
    let (id, expected) = (caller.patient()?, caller.expected()?);
    let p = blocking(move || Ok(app.clinic.update_patient(id, expected, patch)?)).await?;
    Ok(versioned(StatusCode::OK, &p, p.record_version))
}

#[derive(Deserialize)]
pub struct RelatedQuery {
    #[serde(default)]
    sort: RelatedPersonSort,
}

pub async fn list_related(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    QueryParams(q): QueryParams<RelatedQuery>,
) -> ApiResult {
    Ok(json(
        StatusCode::OK,
        &app.clinic.list_related_persons(caller.patient()?, q.sort)?,
    ))
}

pub async fn create_related(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(draft): JsonBody<RelatedPersonDraft>,
) -> ApiResult {
    let pid = caller.patient()?;
    let r = blocking(move || Ok(app.clinic.create_related_person(pid, draft)?)).await?;
    Ok(versioned(StatusCode::CREATED, &r, r.record_version))
}

pub async fn get_related(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult {
    let r = app.clinic.related_person(caller.target::<RelatedPersonId>()?)?;
    Ok(versioned(StatusCode::OK, &r, r.record_version))
}

pub async fn patch_related(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(patch): JsonBody<RelatedPersonPatch>,
) -> ApiResult {
    let (id, expected) = (caller.target::<RelatedPersonId>()?, caller.expected()?);
    let r = blocking(move || Ok(app.clinic.update_related_person(id, expected, patch)?)).await?;
    Ok(versioned(StatusCode::OK, &r, r.record_version))
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EmailRequest {
    pub subject: String,
    pub body: String,
}

/// Queues the message and returns immediately; delivery happens in the
/// outbox worker.
pub async fn email_related(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(req): JsonBody<EmailRequest>,
) -> ApiResult {
    let id = caller.target::<RelatedPersonId>()?;
    let clinic = app.clinic.clone();
    let entry = blocking(move || Ok(clinic.enqueue_email(id, &req.subject, &req.body)?)).await?;
    app.outbox_wake.notify_one();
    Ok(json(StatusCode::ACCEPTED, &entry))
}

pub async fn get_outbox(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult {
    Ok(json(
        StatusCode::OK,
        &app.clinic.outbox_entry(caller.target::<OutboxId>()?)?,
    ))
}
