use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{FieldError, FieldErrors, ValidationCode};
use crate::ids::{PatientId, RelatedPersonId, TherapistId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patient {
    pub id: PatientId,
    pub display_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_number: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marital_status: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub employment_history: Option<String>,
    #[serde(default)]
    pub leisure_interests: Vec<String>,
    pub assigned_therapists: BTreeSet<TherapistId>,
    pub record_version: u64,
}

impl Patient {
    pub fn is_assigned(&self, therapist: TherapistId) -> bool {
        self.assigned_therapists.contains(&therapist)
    }

    pub fn to_draft(&self) -> PatientDraft {
        PatientDraft {
            display_name: self.display_name.clone(),
            file_number: self.file_number.clone(),
            marital_status: self.marital_status.clone(),
            employment_history: self.employment_history.clone(),
            leisure_interests: self.leisure_interests.clone(),
            assigned_therapists: self.assigned_therapists.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientDraft {
    pub display_name: String,
    #[serde(default)]
    pub file_number: Option<String>,
    #[serde(default)]
    pub marital_status: Option<String>,
    #[serde(default)]
    pub employment_history: Option<String>,
    #[serde(default)]
    pub leisure_interests: Vec<String>,
    #[serde(default)]
    pub assigned_therapists: Vec<TherapistId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientPatch {
    pub display_name: Option<String>,
    #[serde(default, deserialize_with = "super::double_option")]
    pub file_number: Option<Option<String>>,
    #[serde(default, deserialize_with = "super::double_option")]
    pub marital_status: Option<Option<String>>,
    #[serde(default, deserialize_with = "super::double_option")]
    pub employment_history: Option<Option<String>>,
    pub leisure_interests: Option<Vec<String>>,
    pub assigned_therapists: Option<Vec<TherapistId>>,
}

impl PatientPatch {
    pub fn apply(self, draft: &mut PatientDraft) {
        if let Some(v) = self.display_name {
            draft.display_name = v;
        }
        if let Some(v) = self.file_number {
            draft.file_number = v;
        }
        if let Some(v) = self.marital_status {
            draft.marital_status = v;
        }
        if let Some(v) = self.employment_history {
            draft.employment_history = v;
        }
        if let Some(v) = self.leisure_interests {
            draft.leisure_interests = v;
        }
        if let Some(v) = self.assigned_therapists {
            draft.assigned_therapists = v;
        }
    }
}

pub fn validate_patient(
    id: PatientId,
    draft: PatientDraft,
    therapist_exists: impl Fn(TherapistId) -> bool,
) -> Result<Patient, Vec<FieldError>> {
    let mut errors = FieldErrors::default();
    let display_name = draft.display_name.trim().to_string();
    if display_name.is_empty() {
        errors.push("display_name", ValidationCode::EmptyName);
    }
    let assigned: BTreeSet<TherapistId> = draft.assigned_therapists.iter().copied().collect();
    if assigned.is_empty() {
        errors.push("assigned_therapists", ValidationCode::NoAssignedTherapist);
    }
    if assigned.iter().any(|t| !therapist_exists(*t)) {
        errors.push("assigned_therapists", ValidationCode::UnknownTherapist);
    }
    let leisure_interests = draft
        .leisure_interests
        .iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    errors.into_result(|| Patient {
        id,
        display_name,
        file_number: non_empty(draft.file_number),
        marital_status: non_empty(draft.marital_status),
        employment_history: non_empty(draft.employment_history),
        leisure_interests,
        assigned_therapists: assigned,
        record_version: 0,
    })
}

/// Seed relationship vocabulary; any other non-empty tag is accepted.
pub const SEED_RELATIONSHIPS: [&str; 5] = ["spouse", "child", "sibling", "friend", "professional-caregiver"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelatedPerson {
    pub id: RelatedPersonId,
    pub patient_id: PatientId,
    pub display_name: String,
    pub relationship_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact_email: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profession: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remarks: Option<String>,
    pub is_caregiver: bool,
    pub record_version: u64,
}

impl RelatedPerson {
    pub fn to_draft(&self) -> RelatedPersonDraft {
        RelatedPersonDraft {
            display_name: self.display_name.clone(),
            relationship_type: self.relationship_type.clone(),
            contact_email: self.contact_email.clone(),
            profession: self.profession.clone(),
            remarks: self.remarks.clone(),
            is_caregiver: self.is_caregiver,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelatedPersonDraft {
    pub display_name: String,
    pub relationship_type: String,
    #[serde(default)]
    pub contact_email: Option<String>,
    #[serde(default)]
    pub profession: Option<String>,
    #[serde(default)]
    pub remarks: Option<String>,
    #[serde(default)]
    pub is_caregiver: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelatedPersonPatch {
    pub display_name: Option<String>,
    pub relationship_type: Option<String>,
    #[serde(default, deserialize_with = "super::double_option")]
    pub contact_email: Option<Option<String>>,
    #[serde(default, deserialize_with = "super::double_option")]
    pub profession: Option<Option<String>>,
    #[serde(default, deserialize_with = "super::double_option")]
    pub remarks: Option<Option<String>>,
    pub is_caregiver: Option<bool>,
}

impl RelatedPersonPatch {
    pub fn apply(self, draft: &mut RelatedPersonDraft) {
        if let Some(v) = self.display_name {
            draft.display_name = v;
        }
        if let Some(v) = self.relationship_type {
            draft.relationship_type = v;
        }
        if let Some(v) = self.contact_email {
            draft.contact_email = v;
        }
        if let Some(v) = self.profession {
            draft.profession = v;
        }
        if let Some(v) = self.remarks {
            draft.remarks = v;
        }
        if let Some(v) = self.is_caregiver {
            draft.is_caregiver = v;
        }
    }
}

pub fn validate_related_person(
    id: RelatedPersonId,
    patient_id: PatientId,
    draft: RelatedPersonDraft,
) -> Result<RelatedPerson, Vec<FieldError>> {
    let mut errors = FieldErrors::default();
    let display_name = draft.display_name.trim().to_string();
    if display_name.is_empty() {
        errors.push("display_name", ValidationCode::EmptyName);
    }
    let relationship_type = draft.relationship_type.trim().to_lowercase();
    if relationship_type.is_empty() {
        errors.push("relationship_type", ValidationCode::EmptyRelationshipType);
    }
    let contact_email = non_empty(draft.contact_email);
    if let Some(email) = &contact_email {
        if !is_addr_spec(email) {
            errors.push("contact_email", ValidationCode::BadEmail);
        }
    }
    errors.into_result(|| RelatedPerson {
        id,
        patient_id,
        display_name,
        relationship_type,
        contact_email,
        profession: non_empty(draft.profession),
        remarks: non_empty(draft.remarks),
        is_caregiver: draft.is_caregiver,
        record_version: 0,
    })
}

/// A therapist login. The credential hash lives in the store's credential
/// table, never on this type, so it cannot leak through serialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TherapistAccount {
    pub id: TherapistId,
    pub display_name: String,
    pub email: String,
}

pub fn validate_therapist(
    id: TherapistId,
    display_name: &str,
    email: &str,
) -> Result<TherapistAccount, Vec<FieldError>> {
    let mut errors = FieldErrors::default();
    if display_name.trim().is_empty() {
        errors.push("display_name", ValidationCode::EmptyName);
    }
    if !is_addr_spec(email.trim()) {
        errors.push("email", ValidationCode::BadEmail);
    }
    errors.into_result(|| TherapistAccount {
        id,
        display_name: display_name.trim().to_string(),
        email: email.trim().to_string(),
    })
}

/// Dot-atom `local@domain` check: atext runs separated by single dots on the
/// left, alphanumeric/hyphen labels on the right.
pub fn is_addr_spec(s: &str) -> bool {
    let Some((local, domain)) = s.rsplit_once('@') else {
        return false;
    };
    let atext = |c: char| c.is_ascii_alphanumeric() || "!#$%&'*+-/=?^_`{|}~".contains(c);
    let local_ok = !local.is_empty() && local.split('.').all(|part| !part.is_empty() && part.chars().all(atext));
    let domain_ok = !domain.is_empty()
        && domain.split('.').all(|label| {
            !label.is_empty()
                && label.len() <= 63
                && !label.starts_with('-')
                && !label.ends_with('-')
                && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
        });
    local_ok && domain_ok
}

pub(crate) fn non_empty(s: Option<String>) -> Option<String> {
    s.map(|s| s.trim().to_string()).filter(|s| !s.is_empty())
}
