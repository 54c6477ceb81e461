use axum::extract::State;
use axum::http::StatusCode;
use axum::Extension;
use recuerdame_core::domain::{AssessmentDraft, AssessmentPatch};
use recuerdame_core::ids::AssessmentId;
use serde::Deserialize;

use super::{blocking, json, pdf, versioned, ApiResult};
use crate::extract::{JsonBody, QueryParams};
use crate::routes::Caller;
use crate::AppState;

pub async fn list_assessments(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult {
    Ok(json(StatusCode::OK, &app.clinic.list_assessments(caller.patient()?)?))
}

/// The caller signs the assessment.
pub async fn create_assessment(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(draft): JsonBody<AssessmentDraft>,
) -> ApiResult {
    let (pid, signer) = (caller.patient()?, caller.therapist()?.id);
    let a = blocking(move || Ok(app.clinic.record_assessment(pid, signer, &draft)?)).await?;
    Ok(versioned(StatusCode::CREATED, &a, a.record_version))
}

/// Serves both `/assessments/{id}` and `/assessments/{id}.pdf`.
pub async fn get_assessment(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult {
    let id = caller.target::<AssessmentId>()?;
    if caller.wants_pdf() {
        let pid = caller.patient()?;
        let clinic = app.clinic.clone();
        let doc = blocking(move || Ok(clinic.render_assessment(id)?)).await?;
        return Ok(pdf(doc, pid, app.clinic.now().date_naive()));
    }
    let a = app.clinic.assessment(id)?;
    Ok(versioned(StatusCode::OK, &a, a.record_version))
}

/// Editing re-signs the assessment as the caller.
pub async fn patch_assessment(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(patch): JsonBody<AssessmentPatch>,
) -> ApiResult {
    let (id, expected, signer) = (
        caller.target::<AssessmentId>()?,
        caller.expected()?,
        caller.therapist()?.id,
    );
    let a = blocking(move || Ok(app.clinic.update_assessment(id, expected, signer, patch)?)).await?;
    Ok(versioned(StatusCode::OK, &a, a.record_version))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionQuery {
    instrument: String,
}

pub async fn evolution(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    QueryParams(q): QueryParams<EvolutionQuery>,
) -> ApiResult {
    Ok(json(
        StatusCode::OK,
        &app.clinic.evolution_series(caller.patient()?, &q.instrument)?,
    ))
}
