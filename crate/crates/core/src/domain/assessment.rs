use std::collections::HashSet;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::date::label_key;
use super::people::non_empty;
use super::{DateDraft, PartialDate};
use crate::error::{FieldError, FieldErrors, ValidationCode};
use crate::ids::{AssessmentId, PatientId, TherapistId};

pub const GDS_MIN: i64 = 1;
pub const GDS_MAX: i64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverallImpression {
    Improved,
    Stable,
    Worsened,
}

impl OverallImpression {
    pub fn parse_label(s: &str) -> Option<Self> {
        match label_key(s).as_str() {
            "improved" | "hasimproved" => Some(OverallImpression::Improved),
            "stable" | "remainsstable" => Some(OverallImpression::Stable),
            "worsened" | "hasworsened" => Some(OverallImpression::Worsened),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            OverallImpression::Improved => "Improved",
            OverallImpression::Stable => "Stable",
            OverallImpression::Worsened => "Worsened",
        }
    }
}

/// Score on one standardized instrument together with that instrument's
/// scale bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentResult {
    pub instrument_name: String,
    pub score: f64,
    pub range_min: f64,
    pub range_max: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub therapist_id: TherapistId,
    pub signed_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalAssessment {
    pub id: AssessmentId,
    pub patient_id: PatientId,
    pub assessed_at: NaiveDate,
    pub diagnosis_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnosis_date: Option<PartialDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gds_stage: Option<u8>,
    pub instrument_results: Vec<InstrumentResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonstandard_instruments: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<String>,
    pub overall_impression: OverallImpression,
    pub signature: Signature,
    pub record_version: u64,
}

impl ClinicalAssessment {
    pub fn instrument(&self, name: &str) -> Option<&InstrumentResult> {
        let key = instrument_key(name);
        self.instrument_results
            .iter()
            .find(|r| instrument_key(&r.instrument_name) == key)
    }

    pub fn to_draft(&self) -> AssessmentDraft {
        AssessmentDraft {
            assessed_at: self.assessed_at,
            diagnosis_type: self.diagnosis_type.clone(),
            diagnosis_date: self.diagnosis_date.map(PartialDate::to_draft),
            gds_stage: self.gds_stage.map(i64::from),
            instrument_results: self.instrument_results.clone(),
            nonstandard_instruments: self.nonstandard_instruments.clone(),
            observations: self.observations.clone(),
            overall_impression: match self.overall_impression {
                OverallImpression::Improved => "improved",
                OverallImpression::Stable => "stable",
                OverallImpression::Worsened => "worsened",
            }
            .to_string(),
        }
    }
}

/// One point of an instrument's score history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionPoint {
    pub assessment_id: AssessmentId,
    pub assessed_at: NaiveDate,
    pub score: f64,
    pub range_min: f64,
    pub range_max: f64,
}

/// Instrument names match case-insensitively after trimming.
pub fn instrument_key(name: &str) -> String {
    name.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentDraft {
    pub assessed_at: NaiveDate,
    pub diagnosis_type: String,
    #[serde(default)]
    pub diagnosis_date: Option<DateDraft>,
    #[serde(default)]
    pub gds_stage: Option<i64>,
    #[serde(default)]
    pub instrument_results: Vec<InstrumentResult>,
    #[serde(default)]
    pub nonstandard_instruments: Option<String>,
    #[serde(default)]
    pub observations: Option<String>,
    pub overall_impression: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessmentPatch {
    pub assessed_at: Option<NaiveDate>,
    pub diagnosis_type: Option<String>,
    #[serde(default, deserialize_with = "super::double_option")]
    pub diagnosis_date: Option<Option<DateDraft>>,
    #[serde(default, deserialize_with = "super::double_option")]
    pub gds_stage: Option<Option<i64>>,
    pub instrument_results: Option<Vec<InstrumentResult>>,
    #[serde(default, deserialize_with = "super::double_option")]
    pub nonstandard_instruments: Option<Option<String>>,
    #[serde(default, deserialize_with = "super::double_option")]
    pub observations: Option<Option<String>>,
    pub overall_impression: Option<String>,
}

impl AssessmentPatch {
    pub fn apply(self, draft: &mut AssessmentDraft) {
        if let Some(v) = self.assessed_at {
            draft.assessed_at = v;
        }
        if let Some(v) = self.diagnosis_type {
            draft.diagnosis_type = v;
        }
        if let Some(v) = self.diagnosis_date {
            draft.diagnosis_date = v;
        }
        if let Some(v) = self.gds_stage {
            draft.gds_stage = v;
        }
        if let Some(v) = self.instrument_results {
            draft.instrument_results = v;
        }
        if let Some(v) = self.nonstandard_instruments {
            draft.nonstandard_instruments = v;
        }
        if let Some(v) = self.observations {
            draft.observations = v;
        }
        if let Some(v) = self.overall_impression {
            draft.overall_impression = v;
        }
    }
}

pub fn validate_assessment(
    id: AssessmentId,
    patient_id: PatientId,
    draft: &AssessmentDraft,
    signature: Signature,
) -> Result<ClinicalAssessment, Vec<FieldError>> {
    let mut errors = FieldErrors::default();
    let diagnosis_type = draft.diagnosis_type.trim().to_string();
    if diagnosis_type.is_empty() {
        errors.push("diagnosis_type", ValidationCode::EmptyDiagnosis);
    }
    let diagnosis_date = match draft.diagnosis_date.map(|d| d.validate("diagnosis_date")) {
        Some(Ok(d)) => Some(d),
        Some(Err(e)) => {
            errors.push(e.field, e.code);
            None
        }
        None => None,
    };
    if let Some(stage) = draft.gds_stage {
        if !(GDS_MIN..=GDS_MAX).contains(&stage) {
            errors.push("gds_stage", ValidationCode::GdsOutOfRange);
        }
    }

    let mut seen = HashSet::new();
    let mut instrument_results = Vec::with_capacity(draft.instrument_results.len());
    for (i, r) in draft.instrument_results.iter().enumerate() {
        let field = |f: &str| format!("instrument_results[{i}].{f}");
        let name = r.instrument_name.trim().to_string();
        if name.is_empty() {
            errors.push(field("instrument_name"), ValidationCode::EmptyInstrumentName);
        } else if !seen.insert(instrument_key(&name)) {
            errors.push(field("instrument_name"), ValidationCode::DuplicateInstrument);
        }
        let finite = r.score.is_finite() && r.range_min.is_finite() && r.range_max.is_finite();
        if !finite || r.range_min >= r.range_max {
            errors.push(field("range_max"), ValidationCode::BadInstrumentRange);
        } else if r.score < r.range_min || r.score > r.range_max {
            errors.push(field("score"), ValidationCode::ScoreOutsideInstrumentRange);
        }
        instrument_results.push(InstrumentResult {
            instrument_name: name,
            ..r.clone()
        });
    }

    let overall_impression = OverallImpression::parse_label(&draft.overall_impression);
    if overall_impression.is_none() {
        errors.push("overall_impression", ValidationCode::BadOverallImpression);
    }

    errors.into_result(|| ClinicalAssessment {
        id,
        patient_id,
        assessed_at: draft.assessed_at,
        diagnosis_type,
        diagnosis_date,
        gds_stage: draft.gds_stage.map(|g| g as u8),
        instrument_results,
        nonstandard_instruments: non_empty(draft.nonstandard_instruments.clone()),
        observations: non_empty(draft.observations.clone()),
        overall_impression: overall_impression.expect("checked"),
        signature,
        record_version: 0,
    })
}
