use axum::extract::State;
use axum::http::StatusCode;
use axum::Extension;
use recuerdame_core::life_story::{LifeStoryQuery, StoryboardOptions};
use serde::Deserialize;
use serde_json::json;

use super::{blocking, json, pdf, ApiResult};
use crate::extract::JsonBody;
use crate::routes::Caller;
use crate::AppState;

pub async fn preview(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(query): JsonBody<LifeStoryQuery>,
) -> ApiResult {
    let pid = caller.patient()?;
    let entries = blocking(move || Ok(app.clinic.story_entries(pid, &query)?)).await?;
    Ok(json(
        StatusCode::OK,
        &json!({ "entry_count": entries.len(), "entries": entries }),
    ))
}

pub async fn book_pdf(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(query): JsonBody<LifeStoryQuery>,
) -> ApiResult {
    let pid = caller.patient()?;
    let clinic = app.clinic.clone();
    let doc = blocking(move || Ok(clinic.render_life_story_book(pid, &query)?)).await?;
    Ok(pdf(doc, pid, app.clinic.now().date_naive()))
}

#[derive(Debug, Deserialize)]
pub struct StoryboardRequest {
    #[serde(flatten)]
    query: LifeStoryQuery,
    #[serde(default)]
    slide_seconds: Option<f64>,
}

pub async fn storyboard(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(req): JsonBody<StoryboardRequest>,
) -> ApiResult {
    let pid = caller.patient()?;
    let mut options = StoryboardOptions::default();
    if let Some(s) = req.slide_seconds {
        options.slide_seconds = s;
    }
    let manifest = blocking(move || Ok(app.clinic.storyboard(pid, &req.query, &options)?)).await?;
    Ok(json(StatusCode::OK, &manifest))
}
