use std::sync::Arc;

use chrono::{DateTime, FixedOffset, TimeZone, Utc};
use recuerdame_core::clock::ManualClock;
use recuerdame_core::domain::{Patient, PatientDraft, SessionPlan, TherapistAccount};
use recuerdame_core::ids::MemoryId;
use recuerdame_core::service::Clinic;
use recuerdame_core::store::Store;
use tempfile::TempDir;

pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 9, 0, 0).unwrap()
}

/// A clinic over a throwaway directory, a manual clock, one therapist and
/// one patient assigned to them.
pub struct Fixture {
    pub clinic: Clinic,
    pub clock: ManualClock,
    pub therapist: TherapistAccount,
    pub patient: Patient,
    pub dir: TempDir,
}

impl Fixture {
    pub fn new() -> Self {
        Self::build(false)
    }

    /// Like [`Fixture::new`] but the store writes its snapshot to disk.
    pub fn persistent() -> Self {
        Self::build(true)
    }

    fn build(persistent: bool) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let media = dir.path().join("media");
        let store = if persistent {
            Store::open(&dir.path().join("data"), &media).unwrap()
        } else {
            Store::in_memory(&media).unwrap()
        };
        let clock = ManualClock::new(epoch());
        let clinic = Clinic::new(Arc::new(store), Arc::new(clock.clone()));
        let (therapist, _) = clinic.register_therapist("Ana Ruiz", "ana@clinic.example").unwrap();
        let patient = clinic
            .create_patient(PatientDraft {
                display_name: "María López".to_string(),
                file_number: Some("H-1042".to_string()),
                assigned_therapists: vec![therapist.id],
                ..PatientDraft::default()
            })
            .unwrap();
        Self {
            clinic,
            clock,
            therapist,
            patient,
            dir,
        }
    }

    /// A clinic with no therapists or patients at all.
    pub fn empty_clinic() -> (Clinic, ManualClock, TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::in_memory(&dir.path().join("media")).unwrap();
        let clock = ManualClock::new(epoch());
        (Clinic::new(Arc::new(store), Arc::new(clock.clone())), clock, dir)
    }
}

impl Default for Fixture {
    fn default() -> Self {
        Self::new()
    }
}

pub fn plan(memories: Vec<MemoryId>) -> SessionPlan {
    SessionPlan {
        scheduled_at: FixedOffset::east_opt(3600)
            .unwrap()
            .with_ymd_and_hms(2024, 3, 5, 10, 0, 0)
            .unwrap(),
        objectives: "Recall school years".to_string(),
        description: "Look at class photos".to_string(),
        barriers: Some("noise in room".to_string()),
        facilitators: Some("daughter present".to_string()),
        activity_sequence: vec!["Greeting".to_string(), "Photo review".to_string()],
        session_location: Some("Day centre, room 2".to_string()),
        planned_memory_ids: memories,
        planned_media_ids: Vec::new(),
    }
}
