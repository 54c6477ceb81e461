use std::fmt;

use serde::Serialize;

use crate::domain::SessionStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Machine-readable reason attached to a rejected input field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ValidationCode {
    MoodOutOfRange,
    EmptyDescription,
    BadDate,
    UnknownRelatedPerson,
    CrossPatientReference,
    BadLifeStage,
    BadPreservationStatus,
    BadEmotionValence,
    EmptyCategory,
    UnknownMedia,
    EmptyName,
    EmptyRelationshipType,
    BadEmail,
    NoAssignedTherapist,
    UnknownTherapist,
    GdsOutOfRange,
    ScoreOutsideInstrumentRange,
    BadInstrumentRange,
    EmptyInstrumentName,
    DuplicateInstrument,
    BadOverallImpression,
    EmptyDiagnosis,
    EmptyOverallImpression,
    ParticipationOutOfRange,
    MediaKindMismatch,
    DuplicateOutcome,
    EmptyField,
}

impl ValidationCode {
    pub fn as_str(self) -> &'static str {
        use ValidationCode::*;
        match self {
            MoodOutOfRange => "MOOD_OUT_OF_RANGE",
            EmptyDescription => "EMPTY_DESCRIPTION",
            BadDate => "BAD_DATE",
            UnknownRelatedPerson => "UNKNOWN_RELATED_PERSON",
            CrossPatientReference => "CROSS_PATIENT_REFERENCE",
            BadLifeStage => "BAD_LIFE_STAGE",
            BadPreservationStatus => "BAD_PRESERVATION_STATUS",
            BadEmotionValence => "BAD_EMOTION_VALENCE",
            EmptyCategory => "EMPTY_CATEGORY",
            UnknownMedia => "UNKNOWN_MEDIA",
            EmptyName => "EMPTY_NAME",
            EmptyRelationshipType => "EMPTY_RELATIONSHIP_TYPE",
            BadEmail => "BAD_EMAIL",
            NoAssignedTherapist => "NO_ASSIGNED_THERAPIST",
            UnknownTherapist => "UNKNOWN_THERAPIST",
            GdsOutOfRange => "GDS_OUT_OF_RANGE",
            ScoreOutsideInstrumentRange => "SCORE_OUTSIDE_INSTRUMENT_RANGE",
            BadInstrumentRange => "BAD_INSTRUMENT_RANGE",
            EmptyInstrumentName => "EMPTY_INSTRUMENT_NAME",
            DuplicateInstrument => "DUPLICATE_INSTRUMENT",
            BadOverallImpression => "BAD_OVERALL_IMPRESSION",
            EmptyDiagnosis => "EMPTY_DIAGNOSIS",
            EmptyOverallImpression => "EMPTY_OVERALL_IMPRESSION",
            ParticipationOutOfRange => "PARTICIPATION_OUT_OF_RANGE",
            MediaKindMismatch => "MEDIA_KIND_MISMATCH",
            DuplicateOutcome => "DUPLICATE_OUTCOME",
            EmptyField => "EMPTY_FIELD",
        }
    }
}

impl fmt::Display for ValidationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub code: ValidationCode,
}

impl FieldError {
    pub fn new(field: impl Into<String>, code: ValidationCode) -> Self {
        Self {
            field: field.into(),
            code,
        }
    }
}

/// Collects field errors while a draft is checked so that every violation is
/// reported at once.
#[derive(Debug, Default)]
pub struct FieldErrors(Vec<FieldError>);

impl FieldErrors {
    pub fn push(&mut self, field: impl Into<String>, code: ValidationCode) {
        self.0.push(FieldError::new(field, code));
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_result<T>(self, value: impl FnOnce() -> T) -> Result<T, Vec<FieldError>> {
        if self.0.is_empty() {
            Ok(value())
        } else {
            Err(self.0)
        }
    }

    pub fn into_vec(self) -> Vec<FieldError> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Patient,
    RelatedPerson,
    Memory,
    Media,
    Session,
    SessionReport,
    Assessment,
    Therapist,
    OutboxEntry,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EntityKind::Patient => "patient",
            EntityKind::RelatedPerson => "related person",
            EntityKind::Memory => "memory",
            EntityKind::Media => "media asset",
            EntityKind::Session => "session",
            EntityKind::SessionReport => "session report",
            EntityKind::Assessment => "assessment",
            EntityKind::Therapist => "therapist",
            EntityKind::OutboxEntry => "outbox entry",
        };
        f.write_str(s)
    }
}

/// Coarse error class; the HTTP layer maps each class to one status code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    NotFound,
    Conflict,
    Internal,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("validation failed: {}", summarize(.0))]
    Validation(Vec<FieldError>),
    #[error("{0} {1} not found")]
    NotFound(EntityKind, String),
    #[error("version conflict: expected {expected}, current {actual}")]
    VersionConflict { expected: u64, actual: u64 },
    #[error("illegal session transition from {from:?} to {to:?}")]
    IllegalTransition { from: SessionStatus, to: SessionStatus },
    #[error("session is not in progress")]
    SessionNotLive,
    #[error("memory {0} belongs to another patient")]
    ForeignMemory(String),
    #[error("media asset {0} is not in the patient's media catalog")]
    ForeignMedia(String),
    #[error("outcome recorded for memory {0} that was neither planned nor amended")]
    OutcomeForUnworkedMemory(String),
    #[error("therapist {0} is not assigned to the patient")]
    UnassignedTherapist(String),
    #[error("session {0} has no report")]
    ReportMissing(String),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("search query is empty")]
    EmptyQuery,
    #[error("media content {0} is not in the blob store")]
    MediaUnresolved(String),
    #[error("unsupported media type {0}")]
    UnsupportedMediaType(String),
    #[error("media content is empty")]
    EmptyContent,
    #[error("archive schema version {found} is newer than supported version {supported}")]
    SchemaTooNew { found: u32, supported: u32 },
    #[error("stored data uses schema version {found}; run `migrate` to upgrade to {current}")]
    SchemaOutdated { found: u32, current: u32 },
    #[error("blob hash mismatch for {name}: content hashes to {actual}")]
    HashMismatch { name: String, actual: String },
    #[error("store is not empty")]
    NotEmpty,
    #[error("related person {0} has no contact email")]
    NoContactEmail(String),
    #[error("referential integrity violated: {0}")]
    Integrity(String),
    #[error("malformed archive: {0}")]
    Archive(String),
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("rendering failed: {0}")]
    Render(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn summarize(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("{}={}", e.field, e.code))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn not_found(kind: EntityKind, id: impl fmt::Display) -> Self {
        Error::NotFound(kind, id.to_string())
    }

    pub fn invalid(field: impl Into<String>, code: ValidationCode) -> Self {
        Error::Validation(vec![FieldError::new(field, code)])
    }

    pub fn code(&self) -> &'static str {
        match self {
            Error::Validation(_) => "VALIDATION_FAILED",
            Error::NotFound(kind, _) => match kind {
                EntityKind::Patient => "UNKNOWN_PATIENT",
                EntityKind::RelatedPerson => "UNKNOWN_RELATED_PERSON",
                EntityKind::Memory => "UNKNOWN_MEMORY",
                EntityKind::Media => "UNKNOWN_MEDIA",
                EntityKind::Session => "UNKNOWN_SESSION",
                EntityKind::SessionReport => "REPORT_MISSING",
                EntityKind::Assessment => "UNKNOWN_ASSESSMENT",
                EntityKind::Therapist => "UNKNOWN_THERAPIST",
                EntityKind::OutboxEntry => "UNKNOWN_OUTBOX_ENTRY",
            },
            Error::VersionConflict { .. } => "VERSION_CONFLICT",
            Error::IllegalTransition { .. } => "ILLEGAL_TRANSITION",
            Error::SessionNotLive => "SESSION_NOT_LIVE",
            Error::ForeignMemory(_) => "FOREIGN_MEMORY",
            Error::ForeignMedia(_) => "FOREIGN_MEDIA",
            Error::OutcomeForUnworkedMemory(_) => "OUTCOME_FOR_UNWORKED_MEMORY",
            Error::UnassignedTherapist(_) => "UNASSIGNED_THERAPIST",
            Error::ReportMissing(_) => "REPORT_MISSING",
            Error::InvalidFilter(_) => "INVALID_FILTER",
            Error::EmptyQuery => "EMPTY_QUERY",
            Error::MediaUnresolved(_) => "MEDIA_UNRESOLVED",
            Error::UnsupportedMediaType(_) => "UNSUPPORTED_MEDIA_TYPE",
            Error::EmptyContent => "EMPTY_CONTENT",
            Error::SchemaTooNew { .. } => "SCHEMA_TOO_NEW",
            Error::SchemaOutdated { .. } => "SCHEMA_OUTDATED",
            Error::HashMismatch { .. } => "HASH_MISMATCH",
            Error::NotEmpty => "NOT_EMPTY",
            Error::NoContactEmail(_) => "NO_CONTACT_EMAIL",
            Error::Integrity(_) => "INTEGRITY_VIOLATION",
            Error::Archive(_) => "MALFORMED_ARCHIVE",
            Error::Storage(_) => "STORAGE_FAILURE",
            Error::Render(_) => "RENDER_FAILURE",
            Error::Io(_) => "IO_FAILURE",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Validation(_)
            | Error::ForeignMemory(_)
            | Error::ForeignMedia(_)
            | Error::OutcomeForUnworkedMemory(_)
            | Error::UnassignedTherapist(_)
            | Error::InvalidFilter(_)
            | Error::EmptyQuery
            | Error::UnsupportedMediaType(_)
            | Error::EmptyContent
            | Error::SchemaTooNew { .. }
            | Error::HashMismatch { .. }
            | Error::NoContactEmail(_)
            | Error::Archive(_) => ErrorClass::Validation,
            Error::NotFound(..) | Error::ReportMissing(_) | Error::MediaUnresolved(_) => ErrorClass::NotFound,
            Error::VersionConflict { .. }
            | Error::IllegalTransition { .. }
            | Error::SessionNotLive
            | Error::NotEmpty
            | Error::Integrity(_) => ErrorClass::Conflict,
            Error::SchemaOutdated { .. } | Error::Storage(_) | Error::Render(_) | Error::Io(_) => ErrorClass::Internal,
        }
    }

    /// Field-level details, present only for validation failures.
    pub fn field_errors(&self) -> &[FieldError] {
        match self {
            Error::Validation(errors) => errors,
            _ => &[],
        }
    }
}

impl From<Vec<FieldError>> for Error {
    fn from(errors: Vec<FieldError>) -> Self {
        Error::Validation(errors)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Storage(e.to_string())
    }
}
