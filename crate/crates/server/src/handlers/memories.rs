use axum::extract::multipart::MultipartError;
use axum::extract::{Multipart, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Extension;
use recuerdame_core::catalog::{Direction, MemoryFilter, SortField, SortKey};
use recuerdame_core::domain::{
    EmotionValence, LifeStage, MediaKind, MediaMetadata, MemoryDraft, MemoryPatch, PreservationStatus,
};
use recuerdame_core::ids::{MediaId, MemoryId, RelatedPersonId};
use serde::Deserialize;
use serde_json::json;

use super::{blocking, json, list, parse_partial_date, versioned, ApiResult};
use crate::error::ApiError;
use crate::extract::{JsonBody, QueryParams};
use crate::routes::Caller;
use crate::AppState;

/// Query string for the memory list. Multi-valued filters are
/// comma-separated; values within one filter are alternatives, distinct
/// filters must all hold.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryQuery {
    life_stages: Option<String>,
    from: Option<String>,
    to: Option<String>,
    categories: Option<String>,
    location: Option<String>,
    related_persons: Option<String>,
    preservation: Option<String>,
    emotion: Option<String>,
    sort: Option<String>,
    order: Option<String>,
    q: Option<String>,
}

fn bad(field: &str, value: &str) -> ApiError {
    ApiError::bad_request("BAD_QUERY", format!("unrecognised {field} value: {value}"))
}

impl MemoryQuery {
    pub fn filter(&self) -> ApiResult<MemoryFilter> {
        let mut f = MemoryFilter::default();
        for s in list(&self.life_stages) {
            f.life_stages
                .insert(LifeStage::parse_label(s).ok_or_else(|| bad("life_stages", s))?);
        }
        f.date_from = self
            .from
            .as_deref()
            .map(|s| parse_partial_date("from", s))
            .transpose()?;
        f.date_to = self.to.as_deref().map(|s| parse_partial_date("to", s)).transpose()?;
        f.categories = list(&self.categories).map(str::to_string).collect();
        f.location_contains = self.location.clone().filter(|s| !s.trim().is_empty());
        for s in list(&self.related_persons) {
            f.related_person_ids
                .insert(s.parse::<RelatedPersonId>().map_err(|_| bad("related_persons", s))?);
        }
        for s in list(&self.preservation) {
            f.preservation_statuses
                .insert(PreservationStatus::parse_label(s).ok_or_else(|| bad("preservation", s))?);
        }
        for s in list(&self.emotion) {
            f.emotion_valences
                .insert(EmotionValence::parse_label(s).ok_or_else(|| bad("emotion", s))?);
        }
        Ok(f)
    }

    pub fn sort_key(&self) -> ApiResult<SortKey> {
        let field = match self.sort.as_deref().unwrap_or("date") {
            "date" => SortField::Date,
            "location" => SortField::Location,
            "preservation_status" => SortField::PreservationStatus,
            "emotion_valence" => SortField::EmotionValence,
            "related_person_count" => SortField::RelatedPersonCount,
            other => return Err(bad("sort", other)),
        };
        let direction = match self.order.as_deref().unwrap_or("asc") {
            "asc" => Direction::Asc,
            "desc" => Direction::Desc,
            other => return Err(bad("order", other)),
        };
        Ok(SortKey { field, direction })
    }
}

pub async fn list_memories(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    QueryParams(q): QueryParams<MemoryQuery>,
) -> ApiResult {
    let pid = caller.patient()?;
    let (filter, key) = (q.filter()?, q.sort_key()?);
    let found = blocking(move || {
        let mut found = app.clinic.filter_memories(pid, &filter, key)?;
        if let Some(text) = q.q.as_deref().filter(|t| !t.trim().is_empty()) {
            let hits: std::collections::BTreeSet<MemoryId> = app
                .clinic
                .search_memories(pid, text)?
                .into_iter()
                .map(|m| m.id)
                .collect();
            found.retain(|m| hits.contains(&m.id));
        }
        Ok(found)
    })
    .await?;
    Ok(json(StatusCode::OK, &found))
}

pub async fn create_memory(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(draft): JsonBody<MemoryDraft>,
) -> ApiResult {
    let pid = caller.patient()?;
    let m = blocking(move || Ok(app.clinic.create_memory(pid, draft)?)).await?;
    Ok(versioned(StatusCode::CREATED, &m, m.record_version))
}

pub async fn get_memory(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult {
    let m = app.clinic.memory(caller.target::<MemoryId>()?)?;
    Ok(versioned(StatusCode::OK, &m, m.record_version))
}

pub async fn patch_memory(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    JsonBody(patch): JsonBody<MemoryPatch>,
) -> ApiResult {
    let (id, expected) = (caller.target::<MemoryId>()?, caller.expected()?);
    let m = blocking(move || Ok(app.clinic.update_memory(id, expected, patch)?)).await?;
    Ok(versioned(StatusCode::OK, &m, m.record_version))
}

pub async fn delete_memory(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult {
    let (id, expected) = (caller.target::<MemoryId>()?, caller.expected()?);
    blocking(move || Ok(app.clinic.delete_memory(id, expected)?)).await?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

fn multipart_error(e: MultipartError) -> ApiError {
    if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::PayloadTooLarge
    } else {
        ApiError::bad_request("MALFORMED_BODY", e.body_text())
    }
}

fn kind_for(content_type: &str) -> Option<MediaKind> {
    match content_type.split('/').next()? {
        "image" => Some(MediaKind::Photo),
        "audio" => Some(MediaKind::Audio),
        "video" => Some(MediaKind::Video),
        _ => None,
    }
}

/// `multipart/form-data` with a `file` part and optional `kind`,
/// `description`, `location`, `date` and `life_stage` text parts.
pub async fn upload_media(
    State(app): State<AppState>,
    Extension(caller): Extension<Caller>,
    mut form: Multipart,
) -> ApiResult {
    let (id, expected) = (caller.target::<MemoryId>()?, caller.expected()?);
    let mut file: Option<(Vec<u8>, String)> = None;
    let (mut kind, mut description, mut location, mut date, mut life_stage) = (None, None, None, None, None);
    while let Some(field) = form.next_field().await.map_err(multipart_error)? {
        let name = field.name().unwrap_or_default().to_string();
        if name == "file" {
            let content_type = field.content_type().unwrap_or("application/octet-stream").to_string();
            let bytes = field.bytes().await.map_err(multipart_error)?;
            file = Some((bytes.to_vec(), content_type));
            continue;
        }
        let text = field.text().await.map_err(multipart_error)?;
        match name.as_str() {
            "kind" => {
                kind = Some(
                    serde_json::from_value::<MediaKind>(json!(text.trim().to_lowercase()))
                        .map_err(|_| bad("kind", &text))?,
                )
            }
            "description" => description = Some(text),
            "location" => location = Some(text),
            "date" => date = Some(parse_partial_date("date", &text)?),
            "life_stage" => life_stage = Some(LifeStage::parse_label(&text).ok_or_else(|| bad("life_stage", &text))?),
            other => {
                return Err(ApiError::bad_request(
                    "MALFORMED_BODY",
                    format!("unexpected form field {other}"),
                ))
            }
        }
    }
    let (bytes, content_type) = file.ok_or_else(|| ApiError::bad_request("MALFORMED_BODY", "missing file part"))?;
    let kind = kind
        .or_else(|| kind_for(&content_type))
        .ok_or_else(|| ApiError::bad_request("UNSUPPORTED_MEDIA_TYPE", format!("cannot store {content_type}")))?;
    let meta = MediaMetadata {
        kind,
        media_type_label: content_type,
        description,
        location,
        date,
        life_stage,
    };
    let (memory, media) = blocking(move || Ok(app.clinic.attach_media(id, expected, &bytes, meta)?)).await?;
    let mut r = json(StatusCode::CREATED, &json!({ "memory": memory, "media": media }));
    r.headers_mut().insert(header::ETAG, super::etag(memory.record_version));
    Ok(r)
}

pub async fn get_media(State(app): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult<Response> {
    let id = caller.target::<MediaId>()?;
    let (asset, bytes) = blocking(move || Ok(app.clinic.media_bytes(id)?)).await?;
    let content_type = HeaderValue::from_str(&asset.media_type_label)
        .unwrap_or_else(|_| HeaderValue::from_static("application/octet-stream"));
    let tag = HeaderValue::from_str(&format!("\"{}\"", asset.content_hash.as_str())).expect("hex digest");
    Ok((
        [
            (header::CONTENT_TYPE, content_type),
            (header::ETAG, tag),
            (header::CACHE_CONTROL, HeaderValue::from_static("private, max-age=3600")),
        ],
        bytes,
    )
        .into_response())
}
