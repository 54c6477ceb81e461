use std::collections::{BTreeSet, HashSet};

use chrono::{DateTime, FixedOffset, Utc};
use serde::{Deserialize, Serialize};

use super::memory::FieldChange;
use super::people::non_empty;
use super::{EmotionValence, PreservationStatus};
use crate::error::{Error, FieldErrors, ValidationCode};
use crate::ids::{MediaId, MemoryId, PatientId, SessionId, TherapistId};

pub const PARTICIPATION_MIN: i64 = 0;
pub const PARTICIPATION_MAX: i64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Planned,
    InProgress,
    Completed,
    Cancelled,
}

impl SessionStatus {
    pub const ALL: [SessionStatus; 4] = [
        SessionStatus::Planned,
        SessionStatus::InProgress,
        SessionStatus::Completed,
        SessionStatus::Cancelled,
    ];

    /// The only legal edges are Planned→InProgress, Planned→Cancelled and
    /// InProgress→Completed.
    pub fn can_transition_to(self, to: SessionStatus) -> bool {
        matches!(
            (self, to),
            (SessionStatus::Planned, SessionStatus::InProgress)
                | (SessionStatus::Planned, SessionStatus::Cancelled)
                | (SessionStatus::InProgress, SessionStatus::Completed)
        )
    }

    pub fn is_live(self) -> bool {
        self == SessionStatus::InProgress
    }

    pub fn label(self) -> &'static str {
        match self {
            SessionStatus::Planned => "Planned",
            SessionStatus::InProgress => "In progress",
            SessionStatus::Completed => "Completed",
            SessionStatus::Cancelled => "Cancelled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmendmentKind {
    Added,
    Modified,
}

/// One change made to the memory catalog while a session was live.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmendmentEntry {
    pub at: DateTime<Utc>,
    pub memory_id: MemoryId,
    pub kind: AmendmentKind,
    pub summary: String,
    #[serde(default)]
    pub changes: Vec<FieldChange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: SessionId,
    pub patient_id: PatientId,
    pub scheduled_at: DateTime<FixedOffset>,
    pub objectives: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barriers: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facilitators: Option<String>,
    #[serde(default)]
    pub activity_sequence: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_location: Option<String>,
    pub planned_memory_ids: Vec<MemoryId>,
    pub planned_media_ids: BTreeSet<MediaId>,
    pub status: SessionStatus,
    #[serde(default)]
    pub amendment_log: Vec<AmendmentEntry>,
    pub record_version: u64,
}

impl Session {
    pub fn transition(&mut self, to: SessionStatus) -> Result<(), Error> {
        if !self.status.can_transition_to(to) {
            return Err(Error::IllegalTransition { from: self.status, to });
        }
        self.status = to;
        Ok(())
    }

    /// Memories that were planned or touched during the session.
    pub fn worked_memories(&self) -> HashSet<MemoryId> {
        self.planned_memory_ids
            .iter()
            .copied()
            .chain(self.amendment_log.iter().map(|e| e.memory_id))
            .collect()
    }

    /// Appends to the log, clamping the timestamp so entries stay ordered even
    /// if the wall clock steps backwards.
    pub fn log_amendment(&mut self, mut entry: AmendmentEntry) {
        if let Some(last) = self.amendment_log.last() {
            if entry.at < last.at {
                entry.at = last.at;
            }
        }
        self.amendment_log.push(entry);
    }

    pub fn to_plan(&self) -> SessionPlan {
        SessionPlan {
            scheduled_at: self.scheduled_at,
            objectives: self.objectives.clone(),
            description: self.description.clone(),
            barriers: self.barriers.clone(),
            facilitators: self.facilitators.clone(),
            activity_sequence: self.activity_sequence.clone(),
            session_location: self.session_location.clone(),
            planned_memory_ids: self.planned_memory_ids.clone(),
            planned_media_ids: self.planned_media_ids.iter().copied().collect(),
        }
    }
}

/// The fields a therapist fills in when preparing a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub scheduled_at: DateTime<FixedOffset>,
    pub objectives: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub barriers: Option<String>,
    #[serde(default)]
    pub facilitators: Option<String>,
    #[serde(default)]
    pub activity_sequence: Vec<String>,
    #[serde(default)]
    pub session_location: Option<String>,
    #[serde(default)]
    pub planned_memory_ids: Vec<MemoryId>,
    #[serde(default)]
    pub planned_media_ids: Vec<MediaId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionPatch {
    pub scheduled_at: Option<DateTime<FixedOffset>>,
    pub objectives: Option<String>,
    pub description: Option<String>,
    #[serde(default, deserialize_with = "super::double_option")]
    pub barriers: Option<Option<String>>,
    #[serde(default, deserialize_with = "super::double_option")]
    pub facilitators: Option<Option<String>>,
    pub activity_sequence: Option<Vec<String>>,
    #[serde(default, deserialize_with = "super::double_option")]
    pub session_location: Option<Option<String>>,
    pub planned_memory_ids: Option<Vec<MemoryId>>,
    pub planned_media_ids: Option<Vec<MediaId>>,
}

impl SessionPatch {
    pub fn apply(self, plan: &mut SessionPlan) {
        if let Some(v) = self.scheduled_at {
            plan.scheduled_at = v;
        }
        if let Some(v) = self.objectives {
            plan.objectives = v;
        }
        if let Some(v) = self.description {
            plan.description = v;
        }
        if let Some(v) = self.barriers {
            plan.barriers = v;
        }
        if let Some(v) = self.facilitators {
            plan.facilitators = v;
        }
        if let Some(v) = self.activity_sequence {
            plan.activity_sequence = v;
        }
        if let Some(v) = self.session_location {
            plan.session_location = v;
        }
        if let Some(v) = self.planned_memory_ids {
            plan.planned_memory_ids = v;
        }
        if let Some(v) = self.planned_media_ids {
            plan.planned_media_ids = v;
        }
    }
}

impl SessionPlan {
    /// Field-level checks that need no catalog access. Ownership of planned
    /// memories and media is checked by the service against the store.
    pub fn into_session(self, id: SessionId, patient_id: PatientId) -> Result<Session, Error> {
        let mut errors = FieldErrors::default();
        let objectives = self.objectives.trim().to_string();
        if objectives.is_empty() {
            errors.push("objectives", ValidationCode::EmptyField);
        }
        if !errors.is_empty() {
            return Err(Error::Validation(errors.into_vec()));
        }
        let mut planned_memory_ids = Vec::with_capacity(self.planned_memory_ids.len());
        for m in self.planned_memory_ids {
            if !planned_memory_ids.contains(&m) {
                planned_memory_ids.push(m);
            }
        }
        Ok(Session {
            id,
            patient_id,
            scheduled_at: self.scheduled_at,
            objectives,
            description: self.description.trim().to_string(),
            barriers: non_empty(self.barriers),
            facilitators: non_empty(self.facilitators),
            activity_sequence: self
                .activity_sequence
                .into_iter()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
            session_location: non_empty(self.session_location),
            planned_memory_ids,
            planned_media_ids: self.planned_media_ids.into_iter().collect(),
            status: SessionStatus::Planned,
            amendment_log: Vec::new(),
            record_version: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryOutcome {
    pub memory_id: MemoryId,
    pub observed_preservation: PreservationStatus,
    pub emotional_reaction: EmotionValence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: SessionId,
    pub overall_impression: String,
    pub memory_outcomes: Vec<MemoryOutcome>,
    pub participation_score: u8,
    pub repeat_recommended: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub future_proposals: Option<String>,
    pub created_at: DateTime<Utc>,
    /// Therapist who closed the session.
    pub author_id: TherapistId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeDraft {
    pub memory_id: MemoryId,
    pub observed_preservation: String,
    pub emotional_reaction: String,
    #[serde(default)]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportDraft {
    pub overall_impression: String,
    #[serde(default)]
    pub memory_outcomes: Vec<OutcomeDraft>,
    pub participation_score: i64,
    #[serde(default)]
    pub repeat_recommended: bool,
    #[serde(default)]
    pub future_proposals: Option<String>,
}

impl ReportDraft {
    pub fn validate(
        &self,
        session: &Session,
        author_id: TherapistId,
        created_at: DateTime<Utc>,
    ) -> Result<SessionReport, Error> {
        let mut errors = FieldErrors::default();
        let overall_impression = self.overall_impression.trim().to_string();
        if overall_impression.is_empty() {
            errors.push("overall_impression", ValidationCode::EmptyOverallImpression);
        }
        if !(PARTICIPATION_MIN..=PARTICIPATION_MAX).contains(&self.participation_score) {
            errors.push("participation_score", ValidationCode::ParticipationOutOfRange);
        }
        let worked = session.worked_memories();
        let mut seen = HashSet::new();
        let mut outcomes = Vec::with_capacity(self.memory_outcomes.len());
        let mut unworked = None;
        for (i, o) in self.memory_outcomes.iter().enumerate() {
            let field = |f: &str| format!("memory_outcomes[{i}].{f}");
            if !worked.contains(&o.memory_id) {
                unworked.get_or_insert(o.memory_id);
            }
            if !seen.insert(o.memory_id) {
                errors.push(field("memory_id"), ValidationCode::DuplicateOutcome);
            }
            let preservation = PreservationStatus::parse_label(&o.observed_preservation);
            if preservation.is_none() {
                errors.push(field("observed_preservation"), ValidationCode::BadPreservationStatus);
            }
            let reaction = EmotionValence::parse_label(&o.emotional_reaction);
            if reaction.is_none() {
                errors.push(field("emotional_reaction"), ValidationCode::BadEmotionValence);
            }
            if let (Some(p), Some(r)) = (preservation, reaction) {
                outcomes.push(MemoryOutcome {
                    memory_id: o.memory_id,
                    observed_preservation: p,
                    emotional_reaction: r,
                    notes: non_empty(o.notes.clone()),
                });
            }
        }
        // Referential failure is reported ahead of field-level problems.
        if let Some(m) = unworked {
            return Err(Error::OutcomeForUnworkedMemory(m.to_string()));
        }
        if !errors.is_empty() {
            return Err(Error::Validation(errors.into_vec()));
        }
        Ok(SessionReport {
            session_id: session.id,
            overall_impression,
            memory_outcomes: outcomes,
            participation_score: self.participation_score as u8,
            repeat_recommended: self.repeat_recommended,
            future_proposals: non_empty(self.future_proposals.clone()),
            created_at,
            author_id,
        })
    }
}
