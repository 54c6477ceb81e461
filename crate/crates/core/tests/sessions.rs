use std::sync::Arc;

use chrono::Duration;
use recuerdame_core::domain::{MemoryPatch, OutcomeDraft, PreservationStatus, ReportDraft, SessionStatus};
use recuerdame_core::error::Error;
use recuerdame_core::service::{Amendment, END_SESSION_FAULT_POINT};
use recuerdame_testkit::checks;
use recuerdame_testkit::fixture::{plan, Fixture};
use recuerdame_testkit::gen;

#[test]
fn random_event_sequences_keep_the_session_invariants() {
    let stats = checks::session_machine(0x5E55, 1500).unwrap();
    assert_eq!(stats.sequences, 1500);
    assert!(stats.faults_injected > 0);
    assert!(stats.accepted > 0 && stats.rejected > 0);
}

fn report(outcomes: &[recuerdame_core::ids::MemoryId], participation: i64) -> ReportDraft {
    ReportDraft {
        overall_impression: "Engaged".to_string(),
        memory_outcomes: outcomes
            .iter()
            .map(|m| OutcomeDraft {
                memory_id: *m,
                observed_preservation: "preserved".to_string(),
                emotional_reaction: "positive".to_string(),
                notes: None,
            })
            .collect(),
        participation_score: participation,
        repeat_recommended: false,
        future_proposals: None,
    }
}

#[test]
fn three_planned_memories_end_with_a_report() {
    let fx = Fixture::new();
    let ids: Vec<_> = (0..3)
        .map(|i| {
            fx.clinic
                .create_memory(
                    fx.patient.id,
                    gen::memory_draft(&format!("m{i}"), "adult", gen::year(1970)),
                )
                .unwrap()
                .id
        })
        .collect();
    let s = fx.clinic.plan_session(fx.patient.id, plan(ids.clone())).unwrap();
    assert_eq!((s.status, s.record_version), (SessionStatus::Planned, 1));
    assert_eq!(s.barriers.as_deref(), Some("noise in room"));
    let s = fx.clinic.start_session(s.id, 1).unwrap();
    let (s, r) = fx
        .clinic
        .end_session(s.id, s.record_version, fx.therapist.id, &report(&ids, 7))
        .unwrap();
    assert_eq!(s.status, SessionStatus::Completed);
    assert_eq!(r.memory_outcomes.len(), 3);
    assert_eq!(r.participation_score, 7);
    assert!(matches!(
        fx.clinic.start_session(s.id, s.record_version),
        Err(Error::IllegalTransition { .. })
    ));
}

#[test]
fn amendments_update_catalog_and_log_together() {
    let fx = Fixture::new();
    let m = fx
        .clinic
        .create_memory(
            fx.patient.id,
            gen::memory_draft("Market stall", "adult", gen::year(1970)),
        )
        .unwrap();
    let s = fx.clinic.plan_session(fx.patient.id, plan(vec![m.id])).unwrap();
    let early = fx.clinic.amend_memory_in_session(
        s.id,
        s.record_version,
        Amendment::AddMemory {
            memory: gen::memory_draft("x", "adult", gen::year(1970)),
        },
    );
    assert!(matches!(early, Err(Error::SessionNotLive)));

    let s = fx.clinic.start_session(s.id, s.record_version).unwrap();
    fx.clock.advance(Duration::minutes(5));
    let added = fx
        .clinic
        .amend_memory_in_session(
            s.id,
            s.record_version,
            Amendment::AddMemory {
                memory: gen::memory_draft("Brother's wedding", "young adult", gen::year(1963)),
            },
        )
        .unwrap();
    assert_eq!(
        fx.clinic
            .filter_memories(
                fx.patient.id,
                &Default::default(),
                recuerdame_core::catalog::SortKey::DATE_ASC
            )
            .unwrap()
            .len(),
        2
    );
    assert_eq!(added.session.amendment_log.len(), 1);

    fx.clock.advance(Duration::minutes(5));
    let modified = fx
        .clinic
        .amend_memory_in_session(
            s.id,
            added.session.record_version,
            Amendment::ModifyMemory {
                memory_id: m.id,
                memory_record_version: m.record_version,
                changes: MemoryPatch {
                    preservation_status: Some("at risk".to_string()),
                    ..MemoryPatch::default()
                },
            },
        )
        .unwrap();
    let stored = fx.clinic.memory(m.id).unwrap();
    assert_eq!(stored.preservation_status, PreservationStatus::AtRisk);
    let log = &modified.session.amendment_log;
    assert_eq!(log.len(), 2);
    assert_eq!(log[1].memory_id, m.id);
    assert!(
        log[1].summary.contains("preservation_status: preserved -> at_risk"),
        "{}",
        log[1].summary
    );
    assert!(log[0].at < log[1].at);

    // The live-added memory can be reported on; a never-worked one cannot.
    let stranger = fx
        .clinic
        .create_memory(fx.patient.id, gen::memory_draft("Unrelated", "adult", gen::year(1990)))
        .unwrap();
    let s = modified.session;
    let bad = fx
        .clinic
        .end_session(s.id, s.record_version, fx.therapist.id, &report(&[stranger.id], 5));
    assert_eq!(bad.unwrap_err().code(), "OUTCOME_FOR_UNWORKED_MEMORY");
    let bad = fx
        .clinic
        .end_session(s.id, s.record_version, fx.therapist.id, &report(&[], 11));
    assert!(bad
        .unwrap_err()
        .field_errors()
        .iter()
        .any(|e| e.code.as_str() == "PARTICIPATION_OUT_OF_RANGE"));
    fx.clinic
        .end_session(
            s.id,
            s.record_version,
            fx.therapist.id,
            &report(&[added.memory.id, m.id], 5),
        )
        .unwrap();
}

#[test]
fn crash_between_status_and_report_leaves_session_live() {
    let fx = Fixture::persistent();
    let s = fx.clinic.plan_session(fx.patient.id, plan(vec![])).unwrap();
    let s = fx.clinic.start_session(s.id, s.record_version).unwrap();
    fx.clinic.store().set_fault_hook(Some(Arc::new(|p| {
        if p == END_SESSION_FAULT_POINT {
            Err(Error::Storage("power loss".into()))
        } else {
            Ok(())
        }
    })));
    assert!(fx
        .clinic
        .end_session(s.id, s.record_version, fx.therapist.id, &report(&[], 3))
        .is_err());
    fx.clinic.store().set_fault_hook(None);
    assert_eq!(fx.clinic.session(s.id).unwrap().status, SessionStatus::InProgress);
    assert!(matches!(fx.clinic.session_report(s.id), Err(Error::ReportMissing(_))));

    // The on-disk snapshot agrees after a restart.
    let reopened =
        recuerdame_core::store::Store::open(&fx.dir.path().join("data"), &fx.dir.path().join("media")).unwrap();
    let db = reopened.snapshot();
    assert_eq!(db.sessions.get(s.id).unwrap().status, SessionStatus::InProgress);
    assert!(db.session_reports.is_empty());
}

#[test]
fn reschedule_rules() {
    let fx = Fixture::new();
    let s = fx.clinic.plan_session(fx.patient.id, plan(vec![])).unwrap();
    let same = fx.clinic.reschedule_session(s.id, 1, s.scheduled_at).unwrap();
    assert_eq!(same.record_version, 2);
    let moved = fx
        .clinic
        .reschedule_session(s.id, 2, s.scheduled_at + Duration::days(1))
        .unwrap();
    assert_eq!(moved.scheduled_at, s.scheduled_at + Duration::days(1));
    let stale = fx.clinic.reschedule_session(s.id, 2, s.scheduled_at);
    assert!(matches!(stale, Err(Error::VersionConflict { .. })));
    let live = fx.clinic.start_session(s.id, 3).unwrap();
    let r = fx.clinic.reschedule_session(s.id, live.record_version, s.scheduled_at);
    assert!(matches!(r, Err(Error::IllegalTransition { .. })));
}

#[test]
fn cancelled_sessions_cannot_start() {
    let fx = Fixture::new();
    let s = fx.clinic.plan_session(fx.patient.id, plan(vec![])).unwrap();
    let c = fx.clinic.cancel_session(s.id, 1).unwrap();
    assert!(matches!(
        fx.clinic.start_session(s.id, c.record_version),
        Err(Error::IllegalTransition { .. })
    ));
}
