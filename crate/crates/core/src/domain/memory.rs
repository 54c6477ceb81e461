use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::date::label_key;
use super::{DateDraft, LifeStage, PartialDate};
use crate::error::{FieldError, FieldErrors, ValidationCode};
use crate::ids::{MediaId, MemoryId, PatientId, RelatedPersonId};

pub const MOOD_MIN: i64 = 0;
pub const MOOD_MAX: i64 = 10;

/// Seed category vocabulary; the set is open.
pub const SEED_CATEGORIES: [&str; 5] = ["family", "friends", "work", "hobbies", "pets"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreservationStatus {
    Preserved,
    AtRisk,
    Lost,
}

impl PreservationStatus {
    pub const ALL: [PreservationStatus; 3] = [
        PreservationStatus::Preserved,
        PreservationStatus::AtRisk,
        PreservationStatus::Lost,
    ];

    pub fn parse_label(s: &str) -> Option<Self> {
        match label_key(s).as_str() {
            "preserved" | "memorypreserved" => Some(PreservationStatus::Preserved),
            "atrisk" | "atriskofloss" => Some(PreservationStatus::AtRisk),
            "lost" => Some(PreservationStatus::Lost),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PreservationStatus::Preserved => "Preserved",
            PreservationStatus::AtRisk => "At risk of loss",
            PreservationStatus::Lost => "Lost",
        }
    }

    fn wire(self) -> &'static str {
        match self {
            PreservationStatus::Preserved => "preserved",
            PreservationStatus::AtRisk => "at_risk",
            PreservationStatus::Lost => "lost",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionValence {
    Positive,
    Neutral,
    Negative,
}

impl EmotionValence {
    pub const ALL: [EmotionValence; 3] = [
        EmotionValence::Positive,
        EmotionValence::Neutral,
        EmotionValence::Negative,
    ];

    pub fn parse_label(s: &str) -> Option<Self> {
        match label_key(s).as_str() {
            "positive" => Some(EmotionValence::Positive),
            "neutral" => Some(EmotionValence::Neutral),
            "negative" => Some(EmotionValence::Negative),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EmotionValence::Positive => "Positive",
            EmotionValence::Neutral => "Neutral",
            EmotionValence::Negative => "Negative",
        }
    }

    fn wire(self) -> &'static str {
        match self {
            EmotionValence::Positive => "positive",
            EmotionValence::Neutral => "neutral",
            EmotionValence::Negative => "negative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Memory {
    pub id: MemoryId,
    pub patient_id: PatientId,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    pub date: PartialDate,
    pub life_stage: LifeStage,
    pub categories: BTreeSet<String>,
    pub related_person_ids: BTreeSet<RelatedPersonId>,
    pub preservation_status: PreservationStatus,
    pub emotion_valence: EmotionValence,
    pub mood_score: u8,
    pub media: Vec<MediaId>,
    pub record_version: u64,
}

/// A memory as typed into a form: enumerations arrive as free text and
/// numbers are unchecked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryDraft {
    pub description: String,
    #[serde(default)]
    pub location: Option<String>,
    pub date: DateDraft,
    pub life_stage: String,
    #[serde(default)]
    pub categories: Vec<String>,
    #[serde(default)]
    pub related_person_ids: Vec<RelatedPersonId>,
    pub preservation_status: String,
    pub emotion_valence: String,
    pub mood_score: i64,
    #[serde(default)]
    pub media: Vec<MediaId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryPatch {
    pub description: Option<String>,
    #[serde(default, deserialize_with = "super::double_option")]
    pub location: Option<Option<String>>,
    pub date: Option<DateDraft>,
    pub life_stage: Option<String>,
    pub categories: Option<Vec<String>>,
    pub related_person_ids: Option<Vec<RelatedPersonId>>,
    pub preservation_status: Option<String>,
    pub emotion_valence: Option<String>,
    pub mood_score: Option<i64>,
    pub media: Option<Vec<MediaId>>,
}

impl MemoryPatch {
    pub fn apply(self, draft: &mut MemoryDraft) {
        if let Some(v) = self.description {
            draft.description = v;
        }
        if let Some(v) = self.location {
            draft.location = v;
        }
        if let Some(v) = self.date {
            draft.date = v;
        }
        if let Some(v) = self.life_stage {
            draft.life_stage = v;
        }
        if let Some(v) = self.categories {
            draft.categories = v;
        }
        if let Some(v) = self.related_person_ids {
            draft.related_person_ids = v;
        }
        if let Some(v) = self.preservation_status {
            draft.preservation_status = v;
        }
        if let Some(v) = self.emotion_valence {
            draft.emotion_valence = v;
        }
        if let Some(v) = self.mood_score {
            draft.mood_score = v;
        }
        if let Some(v) = self.media {
            draft.media = v;
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == MemoryPatch::default()
    }
}

/// Lookups validation needs from the surrounding catalog.
pub trait ReferenceLookup {
    /// Owning patient of a related person, or `None` if it does not exist.
    fn related_person_owner(&self, id: RelatedPersonId) -> Option<PatientId>;
    /// Patients whose memories or sessions already use the asset, or `None`
    /// if there is no such asset.
    fn media_users(&self, id: MediaId) -> Option<BTreeSet<PatientId>>;
}

/// Checks a draft against every memory invariant. On success the returned
/// memory has `record_version` 0; the store assigns the real version.
pub fn validate_memory(
    id: MemoryId,
    patient_id: PatientId,
    draft: &MemoryDraft,
    refs: &impl ReferenceLookup,
) -> Result<Memory, Vec<FieldError>> {
    let mut errors = FieldErrors::default();

    let description = draft.description.trim().to_string();
    if description.is_empty() {
        errors.push("description", ValidationCode::EmptyDescription);
    }
    if !(MOOD_MIN..=MOOD_MAX).contains(&draft.mood_score) {
        errors.push("mood_score", ValidationCode::MoodOutOfRange);
    }
    let date = match draft.date.validate("date") {
        Ok(d) => Some(d),
        Err(e) => {
            errors.push(e.field, e.code);
            None
        }
    };
    let life_stage = LifeStage::parse_label(&draft.life_stage);
    if life_stage.is_none() {
        errors.push("life_stage", ValidationCode::BadLifeStage);
    }
    let preservation = PreservationStatus::parse_label(&draft.preservation_status);
    if preservation.is_none() {
        errors.push("preservation_status", ValidationCode::BadPreservationStatus);
    }
    let emotion = EmotionValence::parse_label(&draft.emotion_valence);
    if emotion.is_none() {
        errors.push("emotion_valence", ValidationCode::BadEmotionValence);
    }

    let mut categories = BTreeSet::new();
    for tag in &draft.categories {
        let tag = tag.trim().to_lowercase();
        if tag.is_empty() {
            errors.push("categories", ValidationCode::EmptyCategory);
        } else {
            categories.insert(tag);
        }
    }

    for person in &draft.related_person_ids {
        match refs.related_person_owner(*person) {
            None => errors.push("related_person_ids", ValidationCode::UnknownRelatedPerson),
            Some(owner) if owner != patient_id => {
                errors.push("related_person_ids", ValidationCode::CrossPatientReference)
            }
            Some(_) => {}
        }
    }

    let mut media = Vec::with_capacity(draft.media.len());
    for m in &draft.media {
        match refs.media_users(*m) {
            None => errors.push("media", ValidationCode::UnknownMedia),
            Some(users) if users.iter().any(|u| *u != patient_id) => {
                errors.push("media", ValidationCode::CrossPatientReference)
            }
            Some(_) if media.contains(m) => {}
            Some(_) => media.push(*m),
        }
    }

    if !errors.is_empty() {
        return Err(errors.into_vec());
    }
    Ok(Memory {
        id,
        patient_id,
        description,
        location: super::people::non_empty(draft.location.clone()),
        date: date.expect("checked"),
        life_stage: life_stage.expect("checked"),
        categories,
        related_person_ids: draft.related_person_ids.iter().copied().collect(),
        preservation_status: preservation.expect("checked"),
        emotion_valence: emotion.expect("checked"),
        mood_score: draft.mood_score as u8,
        media,
        record_version: 0,
    })
}

/// One field that differs between two versions of a memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldChange {
    pub field: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
}

impl Memory {
    pub fn to_draft(&self) -> MemoryDraft {
        MemoryDraft {
            description: self.description.clone(),
            location: self.location.clone(),
            date: self.date.to_draft(),
            life_stage: serde_plain(&self.life_stage),
            categories: self.categories.iter().cloned().collect(),
            related_person_ids: self.related_person_ids.iter().copied().collect(),
            preservation_status: self.preservation_status.wire().to_string(),
            emotion_valence: self.emotion_valence.wire().to_string(),
            mood_score: self.mood_score as i64,
            media: self.media.clone(),
        }
    }

    /// Field-by-field changes from `self` to `next`, in declaration order.
    pub fn diff(&self, next: &Memory) -> Vec<FieldChange> {
        let mut out = Vec::new();
        let mut push = |field: &str, a: Option<String>, b: Option<String>| {
            if a != b {
                out.push(FieldChange {
                    field: field.to_string(),
                    from: a,
                    to: b,
                });
            }
        };
        push(
            "description",
            Some(self.description.clone()),
            Some(next.description.clone()),
        );
        push("location", self.location.clone(), next.location.clone());
        push("date", Some(self.date.to_string()), Some(next.date.to_string()));
        push(
            "life_stage",
            Some(serde_plain(&self.life_stage)),
            Some(serde_plain(&next.life_stage)),
        );
        push(
            "categories",
            Some(join(self.categories.iter())),
            Some(join(next.categories.iter())),
        );
        push(
            "related_person_ids",
            Some(join(self.related_person_ids.iter())),
            Some(join(next.related_person_ids.iter())),
        );
        push(
            "preservation_status",
            Some(self.preservation_status.wire().into()),
            Some(next.preservation_status.wire().into()),
        );
        push(
            "emotion_valence",
            Some(self.emotion_valence.wire().into()),
            Some(next.emotion_valence.wire().into()),
        );
        push(
            "mood_score",
            Some(self.mood_score.to_string()),
            Some(next.mood_score.to_string()),
        );
        push("media", Some(join(self.media.iter())), Some(join(next.media.iter())));
        out
    }
}

fn join<T: std::fmt::Display>(items: impl Iterator<Item = T>) -> String {
    items.map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

fn serde_plain<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}
