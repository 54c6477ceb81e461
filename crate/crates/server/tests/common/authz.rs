//! Route-table completeness and the unassigned-therapist walk.

use axum::http::{Method, StatusCode};
use recuerdame_core::domain::{MediaKind, MediaMetadata, OutcomeDraft, PatientDraft, RelatedPersonDraft, ReportDraft};
use recuerdame_server::routes::{Owner, Scope, ROUTES};
use recuerdame_testkit::fixture::plan;
use recuerdame_testkit::gen;
use serde_json::json;

use super::Harness;

/// The owner a path's `{id}` must resolve through, judged from the path
/// alone so the table cannot vouch for itself.
fn expected_owner(path: &str) -> Option<Owner> {
    let first = path.trim_start_matches('/').split('/').next()?;
    Some(match first {
        "patients" => Owner::Patient,
        "related-persons" => Owner::RelatedPerson,
        "memories" => Owner::Memory,
        "media" => Owner::Media,
        "sessions" => Owner::Session,
        "assessments" => Owner::Assessment,
        "outbox" => Owner::Outbox,
        _ => return None,
    })
}

/// Every way the table could leave a patient route unguarded.
pub fn route_table_problems() -> Vec<String> {
    let mut problems = Vec::new();
    for (i, r) in ROUTES.iter().enumerate() {
        let has_param = r.path.contains('{');
        match (has_param, r.scope) {
            (true, Scope::Patient(owner)) => {
                if expected_owner(r.path) != Some(owner) {
                    problems.push(format!("{r:?} resolves through {owner:?}"));
                }
            }
            (true, other) => problems.push(format!("{r:?} names an entity but has scope {other:?}")),
            (false, Scope::Patient(_)) => problems.push(format!("{r:?} has no id to resolve")),
            (false, Scope::Public) if r.path != "/healthz" => problems.push(format!("{r:?} is public")),
            (false, _) => {}
        }
        if !has_param && !matches!(r.path, "/me" | "/patients" | "/healthz") {
            problems.push(format!("{r:?} is an unexpected account-level route"));
        }
        if matches!(
            r.verb,
            recuerdame_server::routes::Verb::Patch | recuerdame_server::routes::Verb::Delete
        ) && !r.if_match
        {
            problems.push(format!("{r:?} modifies a record without If-Match"));
        }
        for other in &ROUTES[i + 1..] {
            if other.verb == r.verb && other.path == r.path {
                problems.push(format!("{r:?} declared twice"));
            }
            if other.verb == r.verb && other.router_path() == r.router_path() && other.scope != r.scope {
                problems.push(format!("{r:?} and {other:?} share a route but not a scope"));
            }
        }
    }
    problems
}

pub struct World {
    pub owner_token: String,
    pub outsider_token: String,
    pub patient: String,
    pub related_person: String,
    pub memory: String,
    pub media: String,
    pub session: String,
    pub assessment: String,
    pub outbox: String,
}

impl World {
    pub fn id_for(&self, owner: Owner) -> &str {
        match owner {
            Owner::Patient => &self.patient,
            Owner::RelatedPerson => &self.related_person,
            Owner::Memory => &self.memory,
            Owner::Media => &self.media,
            Owner::Session => &self.session,
            Owner::Assessment => &self.assessment,
            Owner::Outbox => &self.outbox,
        }
    }
}

/// One patient with one of everything, assigned to one therapist, plus a
/// second therapist with a patient of their own.
pub fn world(h: &Harness) -> World {
    let c = h.clinic();
    let (owner, owner_token) = h.therapist("Ana Ruiz", "ana@clinic.example");
    let (outsider, outsider_token) = h.therapist("Bruno Díaz", "bruno@clinic.example");
    c.create_patient(PatientDraft {
        display_name: "Bruno's patient".to_string(),
        assigned_therapists: vec![outsider.id],
        ..Default::default()
    })
    .unwrap();
    let p = c
        .create_patient(PatientDraft {
            display_name: "Carmen Vidal".to_string(),
            assigned_therapists: vec![owner.id],
            ..Default::default()
        })
        .unwrap();
    let rp = c
        .create_related_person(
            p.id,
            RelatedPersonDraft {
                display_name: "Iria Vidal".to_string(),
                relationship_type: "granddaughter".to_string(),
                contact_email: Some("iria@family.example".to_string()),
                ..Default::default()
            },
        )
        .unwrap();
    let m = c
        .create_memory(p.id, gen::memory_draft("Lighthouse walk", "adult", gen::year(1971)))
        .unwrap();
    let meta = MediaMetadata {
        kind: MediaKind::Photo,
        media_type_label: "image/png".to_string(),
        description: None,
        location: None,
        date: None,
        life_stage: None,
    };
    let (m, media) = c
        .attach_media(m.id, m.record_version, &gen::png(3, 3, [1, 1, 1]), meta)
        .unwrap();
    let s = c.plan_session(p.id, plan(vec![m.id])).unwrap();
    let s = c.start_session(s.id, s.record_version).unwrap();
    let report = ReportDraft {
        overall_impression: "Good".to_string(),
        memory_outcomes: vec![OutcomeDraft {
            memory_id: m.id,
            observed_preservation: "preserved".to_string(),
            emotional_reaction: "positive".to_string(),
            notes: None,
        }],
        participation_score: 6,
        repeat_recommended: false,
        future_proposals: None,
    };
    c.end_session(s.id, s.record_version, owner.id, &report).unwrap();
    let a = c
        .record_assessment(
            p.id,
            owner.id,
            &serde_json::from_value(json!({
                "assessed_at": "2024-02-01",
                "diagnosis_type": "Vascular dementia",
                "overall_impression": "stable",
            }))
            .unwrap(),
        )
        .unwrap();
    let mail = c.enqueue_email(rp.id, "Photos", "See you Tuesday").unwrap();
    World {
        owner_token,
        outsider_token,
        patient: p.id.to_string(),
        related_person: rp.id.to_string(),
        memory: m.id.to_string(),
        media: media.id.to_string(),
        session: s.id.to_string(),
        assessment: a.id.to_string(),
        outbox: mail.id.to_string(),
    }
}

fn method_of(v: recuerdame_server::routes::Verb) -> Method {
    v.method()
}

/// Calls every patient-scoped route as a therapist who is not assigned.
/// Each must answer 403 with an empty body and change nothing. Returns how
/// many routes were walked.
pub async fn forbidden_walk(h: &Harness, w: &World) -> Result<usize, String> {
    let before = h.clinic().snapshot();
    let outbox_before = h.clinic().outbox();
    let mut walked = 0;
    for r in ROUTES {
        let Scope::Patient(owner) = r.scope else { continue };
        let uri = r.path.replace("{id}", w.id_for(owner));
        let method = method_of(r.verb);
        let body = (method == Method::POST || method == Method::PATCH).then(|| json!({}));
        let if_match = r.if_match.then_some(1);
        let reply = h
            .call(method.clone(), &uri, Some(&w.outsider_token), if_match, body.as_ref())
            .await;
        if reply.status != StatusCode::FORBIDDEN {
            return Err(format!(
                "{method} {uri} gave {} to an unassigned therapist",
                reply.status
            ));
        }
        if !reply.body.is_empty() {
            return Err(format!(
                "{method} {uri} 403 carried a body: {:?}",
                String::from_utf8_lossy(&reply.body)
            ));
        }
        let anon = h.call(method.clone(), &uri, None, if_match, body.as_ref()).await;
        if anon.status != StatusCode::UNAUTHORIZED {
            return Err(format!("{method} {uri} gave {} without credentials", anon.status));
        }
        walked += 1;
    }
    if *h.clinic().snapshot() != *before || h.clinic().outbox() != outbox_before {
        return Err("a refused request changed the store".to_string());
    }
    // The assigned therapist does get through on every read.
    for r in ROUTES.iter().filter(|r| r.verb == recuerdame_server::routes::Verb::Get) {
        let Scope::Patient(owner) = r.scope else { continue };
        let uri = r.path.replace("{id}", w.id_for(owner));
        let reply = h.get(&uri, &w.owner_token).await;
        if matches!(reply.status, StatusCode::FORBIDDEN | StatusCode::UNAUTHORIZED) {
            return Err(format!(
                "GET {uri} refused the assigned therapist with {}",
                reply.status
            ));
        }
    }
    // Account-level listings only show the caller's own patients.
    let mine = h.get("/patients", &w.outsider_token).await.json();
    if mine.as_array().map(|a| a.iter().any(|p| p["id"] == w.patient.as_str())) != Some(false) {
        return Err("GET /patients leaked another therapist's patient".to_string());
    }
    Ok(walked)
}
