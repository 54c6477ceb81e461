//! The route table and the access guard.
//!
//! Every endpoint is declared once in [`ROUTES`] together with how its
//! `{id}` resolves to a patient and whether it needs `If-Match`. The router
//! is built from the table and a single middleware enforces it, so a route
//! cannot be added without stating its access rule.

use std::collections::BTreeMap;
use std::str::FromStr;

use axum::extract::{DefaultBodyLimit, MatchedPath, RawPathParams, Request, State};
use axum::http::{header, HeaderMap, Method};
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{on, MethodFilter, MethodRouter};
use axum::Router;
use recuerdame_core::domain::TherapistAccount;
use recuerdame_core::error::{EntityKind, Error};
use recuerdame_core::ids::{AssessmentId, MediaId, MemoryId, OutboxId, PatientId, RelatedPersonId, SessionId};
use recuerdame_core::store::Database;

use crate::auth;
use crate::error::ApiError;
use crate::handlers::{assessments as a, life_story as ls, memories as m, people as p, sessions as s};
use crate::AppState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Get,
    Post,
    Patch,
    Delete,
}

impl Verb {
    pub fn method(self) -> Method {
        match self {
            Verb::Get => Method::GET,
            Verb::Post => Method::POST,
            Verb::Patch => Method::PATCH,
            Verb::Delete => Method::DELETE,
        }
    }

    fn filter(self) -> MethodFilter {
        match self {
            Verb::Get => MethodFilter::GET,
            Verb::Post => MethodFilter::POST,
            Verb::Patch => MethodFilter::PATCH,
            Verb::Delete => MethodFilter::DELETE,
        }
    }
}

/// What the path `{id}` names. Access is granted when the caller is assigned
/// to the patient that entity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Owner {
    Patient,
    RelatedPerson,
    Memory,
    Media,
    Session,
    Assessment,
    Outbox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// No credentials needed. Only the health probe.
    Public,
    /// Any authenticated therapist. Handlers only ever return the caller's
    /// own patients.
    Account,
    Patient(Owner),
}

pub struct RouteSpec {
    pub verb: Verb,
    pub path: &'static str,
    pub scope: Scope,
    pub if_match: bool,
    handler: fn(MethodFilter) -> MethodRouter<AppState>,
}

impl std::fmt::Debug for RouteSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} {}", self.verb, self.path)
    }
}

const PDF: &str = ".pdf";

impl RouteSpec {
    /// The path as registered with the router. Parameters with a literal
    /// suffix are not supported by the matcher, so `/x/{id}.pdf` is served
    /// by the `/x/{id}` route and told apart by the handler.
    pub fn router_path(&self) -> &'static str {
        match self.path.strip_suffix(PDF) {
            Some(base) if base.ends_with('}') => base,
            _ => self.path,
        }
    }

    pub fn is_suffixed(&self) -> bool {
        self.router_path() != self.path
    }
}

macro_rules! route {
    (@spec $verb:ident $path:literal, $scope:expr, $if_match:expr, $handler:path) => {
        RouteSpec {
            verb: Verb::$verb,
            path: $path,
            scope: $scope,
            if_match: $if_match,
            handler: |f| on(f, $handler),
        }
    };
    ($verb:ident $path:literal, $scope:expr, if_match, $handler:path) => {
        route!(@spec $verb $path, $scope, true, $handler)
    };
    ($verb:ident $path:literal, $scope:expr, $handler:path) => {
        route!(@spec $verb $path, $scope, false, $handler)
    };
}

use Owner::*;
use Scope::{Account, Patient as P};

pub static ROUTES: &[RouteSpec] = &[
    route!(Get "/healthz", Scope::Public, p::health),
    route!(Get "/me", Account, p::me),
    route!(Get "/patients", Account, p::list_patients),
    route!(Post "/patients", Account, p::create_patient),
    route!(Get "/patients/{id}", P(Patient), p::get_patient),
    route!(Patch "/patients/{id}", P(Patient), if_match, p::patch_patient),
    route!(Get "/patients/{id}/related-persons", P(Patient), p::list_related),
    route!(Post "/patients/{id}/related-persons", P(Patient), p::create_related),
    route!(Get "/related-persons/{id}", P(RelatedPerson), p::get_related),
    route!(Patch "/related-persons/{id}", P(RelatedPerson), if_match, p::patch_related),
    route!(Post "/related-persons/{id}/email", P(RelatedPerson), p::email_related),
    route!(Get "/outbox/{id}", P(Outbox), p::get_outbox),
    route!(Get "/patients/{id}/memories", P(Patient), m::list_memories),
    route!(Post "/patients/{id}/memories", P(Patient), m::create_memory),
    route!(Get "/memories/{id}", P(Memory), m::get_memory),
    route!(Patch "/memories/{id}", P(Memory), if_match, m::patch_memory),
    route!(Delete "/memories/{id}", P(Memory), if_match, m::delete_memory),
    route!(Post "/memories/{id}/media", P(Memory), if_match, m::upload_media),
    route!(Get "/media/{id}", P(Media), m::get_media),
    route!(Get "/patients/{id}/sessions", P(Patient), s::list_sessions),
    route!(Post "/patients/{id}/sessions", P(Patient), s::create_session),
    route!(Get "/patients/{id}/calendar", P(Patient), s::calendar),
    route!(Get "/sessions/{id}", P(Session), s::get_session),
    route!(Patch "/sessions/{id}", P(Session), if_match, s::patch_session),
    route!(Post "/sessions/{id}/start", P(Session), if_match, s::start_session),
    route!(Post "/sessions/{id}/cancel", P(Session), if_match, s::cancel_session),
    route!(Post "/sessions/{id}/amendments", P(Session), if_match, s::amend_session),
    route!(Post "/sessions/{id}/end", P(Session), if_match, s::end_session),
    route!(Get "/sessions/{id}/report", P(Session), s::get_report),
    route!(Get "/sessions/{id}/report.pdf", P(Session), s::get_report_pdf),
    route!(Get "/patients/{id}/assessments", P(Patient), a::list_assessments),
    route!(Post "/patients/{id}/assessments", P(Patient), a::create_assessment),
    route!(Get "/patients/{id}/evolution", P(Patient), a::evolution),
    route!(Get "/assessments/{id}", P(Assessment), a::get_assessment),
    route!(Get "/assessments/{id}.pdf", P(Assessment), a::get_assessment),
    route!(Patch "/assessments/{id}", P(Assessment), if_match, a::patch_assessment),
    route!(Post "/patients/{id}/life-story/preview", P(Patient), ls::preview),
    route!(Post "/patients/{id}/life-story/book.pdf", P(Patient), ls::book_pdf),
    route!(Post "/patients/{id}/life-story/storyboard", P(Patient), ls::storyboard),
];

/// What the guard established about a request, for the handler.
#[derive(Debug, Clone)]
pub struct Caller {
    pub therapist: Option<TherapistAccount>,
    pub spec: &'static RouteSpec,
    /// The path `{id}` with any `.pdf` suffix removed.
    pub target: Option<String>,
    /// The patient the target belongs to.
    pub patient: Option<PatientId>,
    pub expected_version: Option<u64>,
}

impl Caller {
    pub fn therapist(&self) -> Result<&TherapistAccount, ApiError> {
        self.therapist
            .as_ref()
            .ok_or_else(|| ApiError::Internal(format!("{:?} reached without a therapist", self.spec)))
    }

    pub fn target<T: FromStr>(&self) -> Result<T, ApiError> {
        self.target
            .as_deref()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| ApiError::Internal(format!("{:?} reached without a target", self.spec)))
    }

    pub fn patient(&self) -> Result<PatientId, ApiError> {
        self.patient
            .ok_or_else(|| ApiError::Internal(format!("{:?} reached without a patient", self.spec)))
    }

    pub fn expected(&self) -> Result<u64, ApiError> {
        self.expected_version
            .ok_or_else(|| ApiError::Internal(format!("{:?} reached without If-Match", self.spec)))
    }

    pub fn wants_pdf(&self) -> bool {
        self.spec.is_suffixed()
    }
}

pub fn lookup(method: &Method, router_path: &str, request_path: &str) -> Option<&'static RouteSpec> {
    let mut candidates = ROUTES
        .iter()
        .filter(|r| r.verb.method() == method && r.router_path() == router_path);
    let wants_suffix = request_path.ends_with(PDF);
    let mut fallback = None;
    for r in candidates.by_ref() {
        if r.is_suffixed() == wants_suffix {
            return Some(r);
        }
        if !r.is_suffixed() {
            fallback = Some(r);
        }
    }
    fallback
}

pub fn router(state: AppState, max_body_bytes: usize) -> Router {
    let mut by_path: BTreeMap<&'static str, MethodRouter<AppState>> = BTreeMap::new();
    for spec in ROUTES.iter().filter(|r| !r.is_suffixed()) {
        let method_router = (spec.handler)(spec.verb.filter());
        let merged = match by_path.remove(spec.router_path()) {
            Some(existing) => existing.merge(method_router),
            None => method_router,
        };
        by_path.insert(spec.router_path(), merged);
    }
    let mut router = Router::new();
    for (path, method_router) in by_path {
        router = router.route(path, method_router);
    }
    router
        .route_layer(middleware::from_fn_with_state(state.clone(), guard))
        .fallback(|| async { ApiError::NoRoute })
        .layer(DefaultBodyLimit::max(max_body_bytes))
        .with_state(state)
}

async fn guard(
    State(app): State<AppState>,
    matched: MatchedPath,
    params: RawPathParams,
    mut req: Request,
    next: Next,
) -> Result<Response, ApiError> {
    let spec = lookup(req.method(), matched.as_str(), req.uri().path())
        .ok_or_else(|| ApiError::Internal(format!("{} {} has no route spec", req.method(), matched.as_str())))?;

    let therapist = match spec.scope {
        Scope::Public => None,
        _ => {
            let header = req.headers().get(header::AUTHORIZATION).and_then(|v| v.to_str().ok());
            Some(auth::authenticate(&app.clinic, &app.key, header).map_err(ApiError::Unauthenticated)?)
        }
    };

    let target = params.iter().find(|(k, _)| *k == "id").map(|(_, v)| {
        v.strip_suffix(PDF)
            .filter(|_| spec.is_suffixed())
            .unwrap_or(v)
            .to_string()
    });

    let patient = match (spec.scope, &therapist, &target) {
        (Scope::Patient(owner), Some(t), Some(raw)) => {
            let db = app.clinic.snapshot();
            let pid = resolve_patient(&db, owner, raw)?;
            let assigned = db.patients.get(pid).is_some_and(|p| p.is_assigned(t.id));
            if !assigned {
                return Err(ApiError::Forbidden);
            }
            Some(pid)
        }
        (Scope::Patient(_), _, _) => return Err(ApiError::Internal(format!("{spec:?} lacks an id"))),
        _ => None,
    };

    let expected_version = if spec.if_match {
        Some(parse_if_match(req.headers())?)
    } else {
        None
    };

    req.extensions_mut().insert(Caller {
        therapist,
        spec,
        target,
        patient,
        expected_version,
    });
    Ok(next.run(req).await)
}

fn parse_id<T: FromStr>(raw: &str, kind: EntityKind) -> Result<T, ApiError> {
    raw.parse().map_err(|_| ApiError::Domain(Error::not_found(kind, raw)))
}

/// Maps a path id to the patient it belongs to, or 404.
pub fn resolve_patient(db: &Database, owner: Owner, raw: &str) -> Result<PatientId, ApiError> {
    let missing = |kind: EntityKind| ApiError::Domain(Error::not_found(kind, raw));
    match owner {
        Owner::Patient => {
            let id: PatientId = parse_id(raw, EntityKind::Patient)?;
            db.patients
                .get(id)
                .map(|p| p.id)
                .ok_or_else(|| missing(EntityKind::Patient))
        }
        Owner::RelatedPerson => {
            let id: RelatedPersonId = parse_id(raw, EntityKind::RelatedPerson)?;
            db.related_persons
                .get(id)
                .map(|r| r.patient_id)
                .ok_or_else(|| missing(EntityKind::RelatedPerson))
        }
        Owner::Memory => {
            let id: MemoryId = parse_id(raw, EntityKind::Memory)?;
            db.memories
                .get(id)
                .map(|m| m.patient_id)
                .ok_or_else(|| missing(EntityKind::Memory))
        }
        Owner::Session => {
            let id: SessionId = parse_id(raw, EntityKind::Session)?;
            db.sessions
                .get(id)
                .map(|s| s.patient_id)
                .ok_or_else(|| missing(EntityKind::Session))
        }
        Owner::Assessment => {
            let id: AssessmentId = parse_id(raw, EntityKind::Assessment)?;
            db.assessments
                .get(id)
                .map(|a| a.patient_id)
                .ok_or_else(|| missing(EntityKind::Assessment))
        }
        Owner::Media => {
            let id: MediaId = parse_id(raw, EntityKind::Media)?;
            db.memories
                .values()
                .find(|m| m.media.contains(&id))
                .map(|m| m.patient_id)
                .or_else(|| {
                    db.sessions
                        .values()
                        .find(|s| s.planned_media_ids.contains(&id))
                        .map(|s| s.patient_id)
                })
                .ok_or_else(|| missing(EntityKind::Media))
        }
        Owner::Outbox => {
            let id: OutboxId = parse_id(raw, EntityKind::OutboxEntry)?;
            db.outbox
                .get(id)
                .and_then(|e| db.related_persons.get(e.related_person_id))
                .map(|r| r.patient_id)
                .ok_or_else(|| missing(EntityKind::OutboxEntry))
        }
    }
}

/// Accepts `3`, `"3"` and `W/"3"`.
pub fn parse_if_match(headers: &HeaderMap) -> Result<u64, ApiError> {
    let raw = headers
        .get(header::IF_MATCH)
        .ok_or(ApiError::PreconditionRequired)?
        .to_str()
        .map_err(|_| ApiError::bad_request("BAD_IF_MATCH", "If-Match is not text"))?
        .trim();
    let bare = raw.strip_prefix("W/").unwrap_or(raw).trim_matches('"');
    bare.parse()
        .map_err(|_| ApiError::bad_request("BAD_IF_MATCH", format!("If-Match must be a record version, got {raw}")))
}

#[cfg(test)]
mod tests {
    use axum::http::HeaderValue;

    use super::*;

    #[test]
    fn suffix_routes_share_the_base_path() {
        let pdf = ROUTES.iter().find(|r| r.path == "/assessments/{id}.pdf").unwrap();
        assert_eq!(pdf.router_path(), "/assessments/{id}");
        let report = ROUTES.iter().find(|r| r.path == "/sessions/{id}/report.pdf").unwrap();
        assert!(!report.is_suffixed());
        assert!(std::ptr::eq(
            lookup(&Method::GET, "/assessments/{id}", "/assessments/abc.pdf").unwrap(),
            pdf
        ));
        assert_eq!(
            lookup(&Method::GET, "/assessments/{id}", "/assessments/abc")
                .unwrap()
                .path,
            "/assessments/{id}"
        );
    }

    #[test]
    fn if_match_forms() {
        let mut h = HeaderMap::new();
        assert!(matches!(parse_if_match(&h), Err(ApiError::PreconditionRequired)));
        for (v, want) in [("4", 4), ("\"5\"", 5), ("W/\"6\"", 6)] {
            h.insert(header::IF_MATCH, HeaderValue::from_static(v));
            assert_eq!(parse_if_match(&h).unwrap(), want);
        }
        h.insert(header::IF_MATCH, HeaderValue::from_static("*"));
        assert!(matches!(parse_if_match(&h), Err(ApiError::BadRequest { .. })));
    }
}
