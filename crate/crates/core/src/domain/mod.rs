//! Entities, their validation rules, and the session lifecycle.

mod assessment;
mod date;
mod media;
mod memory;
mod outbox;
mod people;
mod session;

pub use assessment::{
    instrument_key, validate_assessment, AssessmentDraft, AssessmentPatch, ClinicalAssessment, EvolutionPoint,
    InstrumentResult, OverallImpression, Signature, GDS_MAX, GDS_MIN,
};
pub use date::{BadDate, DateDraft, LifeStage, PartialDate, MAX_YEAR, MIN_YEAR};
pub use media::{ContentHash, MediaAsset, MediaKind, MediaMetadata, ACCEPTED_MEDIA_TYPES};
pub use memory::{
    validate_memory, EmotionValence, FieldChange, Memory, MemoryDraft, MemoryPatch, PreservationStatus,
    ReferenceLookup, MOOD_MAX, MOOD_MIN, SEED_CATEGORIES,
};
pub use outbox::{OutboxEntry, OutboxStatus};
pub use people::{
    is_addr_spec, validate_patient, validate_related_person, validate_therapist, Patient, PatientDraft, PatientPatch,
    RelatedPerson, RelatedPersonDraft, RelatedPersonPatch, TherapistAccount, SEED_RELATIONSHIPS,
};
pub use session::{
    AmendmentEntry, AmendmentKind, MemoryOutcome, OutcomeDraft, ReportDraft, Session, SessionPatch, SessionPlan,
    SessionReport, SessionStatus, PARTICIPATION_MAX, PARTICIPATION_MIN,
};

/// Lets a patch tell "leave unchanged" (field absent) apart from "clear"
/// (field present and `null`).
pub(crate) fn double_option<'de, D, T>(d: D) -> Result<Option<Option<T>>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: serde::Deserialize<'de>,
{
    serde::Deserialize::deserialize(d).map(Some)
}
