//! Whole-database consistency checks run before every commit.

use crate::domain::{is_addr_spec, SessionStatus, GDS_MAX, GDS_MIN, MOOD_MAX, PARTICIPATION_MAX};
use crate::error::{Error, Result};

use super::Database;

fn fail(msg: String) -> Result<()> {
    Err(Error::Integrity(msg))
}

pub(super) fn check(db: &Database) -> Result<()> {
    for p in db.patients.values() {
        if p.assigned_therapists.is_empty() {
            return fail(format!("patient {} has no assigned therapist", p.id));
        }
        if let Some(t) = p.assigned_therapists.iter().find(|t| !db.therapists.contains(**t)) {
            return fail(format!("patient {} assigned to unknown therapist {t}", p.id));
        }
    }

    for rp in db.related_persons.values() {
        if !db.patients.contains(rp.patient_id) {
            return fail(format!("related person {} has no patient", rp.id));
        }
        if rp.relationship_type.trim().is_empty() {
            return fail(format!("related person {} has empty relationship type", rp.id));
        }
        if rp.contact_email.as_deref().is_some_and(|e| !is_addr_spec(e)) {
            return fail(format!("related person {} has malformed email", rp.id));
        }
    }

    for m in db.memories.values() {
        if !db.patients.contains(m.patient_id) {
            return fail(format!("memory {} has no patient", m.id));
        }
        if m.description.trim().is_empty() || i64::from(m.mood_score) > MOOD_MAX {
            return fail(format!("memory {} violates field invariants", m.id));
        }
        if m.categories
            .iter()
            .any(|c| c.is_empty() || *c != c.trim().to_lowercase())
        {
            return fail(format!("memory {} has unnormalized categories", m.id));
        }
        for rp in &m.related_person_ids {
            match db.related_persons.get(*rp) {
                Some(p) if p.patient_id == m.patient_id => {}
                _ => return fail(format!("memory {} references foreign person {rp}", m.id)),
            }
        }
        if let Some(media) = m.media.iter().find(|id| !db.media_assets.contains(**id)) {
            return fail(format!("memory {} references missing media {media}", m.id));
        }
    }

    for a in db.media_assets.values() {
        if a.byte_length == 0 {
            return fail(format!("media asset {} is empty", a.id));
        }
    }

    for s in db.sessions.values() {
        if !db.patients.contains(s.patient_id) {
            return fail(format!("session {} has no patient", s.id));
        }
        for mid in &s.planned_memory_ids {
            match db.memories.get(*mid) {
                Some(m) if m.patient_id == s.patient_id => {}
                _ => return fail(format!("session {} plans foreign memory {mid}", s.id)),
            }
        }
        if let Some(media) = s.planned_media_ids.iter().find(|id| !db.media_assets.contains(**id)) {
            return fail(format!("session {} plans missing media {media}", s.id));
        }
        if !s.amendment_log.is_empty() && !matches!(s.status, SessionStatus::InProgress | SessionStatus::Completed) {
            return fail(format!("session {} has amendments while {:?}", s.id, s.status));
        }
        if s.amendment_log.windows(2).any(|w| w[0].at > w[1].at) {
            return fail(format!("session {} amendment log out of order", s.id));
        }
        for e in &s.amendment_log {
            if !db.memories.contains(e.memory_id) {
                return fail(format!("session {} amends missing memory", s.id));
            }
        }
        let has_report = db.session_reports.contains(s.id);
        if has_report != (s.status == SessionStatus::Completed) {
            return fail(format!(
                "session {} is {:?} but report presence is {has_report}",
                s.id, s.status
            ));
        }
    }

    for r in db.session_reports.values() {
        let Some(session) = db.sessions.get(r.session_id) else {
            return fail(format!("report for missing session {}", r.session_id));
        };
        if i64::from(r.participation_score) > PARTICIPATION_MAX {
            return fail(format!("report {} participation out of range", r.session_id));
        }
        let worked = session.worked_memories();
        for o in &r.memory_outcomes {
            if !db.memories.contains(o.memory_id) || !worked.contains(&o.memory_id) {
                return fail(format!(
                    "report {} has outcome for unworked memory {}",
                    r.session_id, o.memory_id
                ));
            }
        }
        if !db.therapists.contains(r.author_id) {
            return fail(format!("report {} author unknown", r.session_id));
        }
    }

    for a in db.assessments.values() {
        if !db.patients.contains(a.patient_id) {
            return fail(format!("assessment {} has no patient", a.id));
        }
        if !db.therapists.contains(a.signature.therapist_id) {
            return fail(format!("assessment {} signed by unknown therapist", a.id));
        }
        if a.gds_stage
            .is_some_and(|g| !(GDS_MIN..=GDS_MAX).contains(&i64::from(g)))
        {
            return fail(format!("assessment {} gds stage out of range", a.id));
        }
        for r in &a.instrument_results {
            if !(r.range_min < r.range_max && r.range_min <= r.score && r.score <= r.range_max) {
                return fail(format!(
                    "assessment {} instrument {} out of range",
                    a.id, r.instrument_name
                ));
            }
        }
    }

    for id in db.credentials.keys() {
        if !db.therapists.contains(*id) {
            return fail(format!("credential for unknown therapist {id}"));
        }
    }
    Ok(())
}
