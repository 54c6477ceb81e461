//! Read-only queries over a patient's memories and related persons.
//!
//! Filter clauses combine conjunctively; within a set-valued clause a memory
//! matches when the sets intersect. An empty set means "no constraint".

use std::cmp::Ordering;
use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::domain::{EmotionValence, LifeStage, Memory, PartialDate, PreservationStatus, RelatedPerson};
use crate::error::{Error, Result};
use crate::ids::RelatedPersonId;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryFilter {
    #[serde(default)]
    pub life_stages: BTreeSet<LifeStage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_from: Option<PartialDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_to: Option<PartialDate>,
    #[serde(default)]
    pub categories: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location_contains: Option<String>,
    #[serde(default)]
    pub related_person_ids: BTreeSet<RelatedPersonId>,
    #[serde(default)]
    pub preservation_statuses: BTreeSet<PreservationStatus>,
    #[serde(default)]
    pub emotion_valences: BTreeSet<EmotionValence>,
}

impl MemoryFilter {
    pub fn validate(&self) -> Result<()> {
        if let (Some(from), Some(to)) = (self.date_from, self.date_to) {
            if from.normal_form() > to.normal_form() {
                return Err(Error::InvalidFilter(format!("date_from {from} is after date_to {to}")));
            }
        }
        Ok(())
    }

    /// Lowercased, trimmed copy with empty tags and blank location dropped.
    pub fn normalized(&self) -> MemoryFilter {
        let mut f = self.clone();
        f.categories = self
            .categories
            .iter()
            .map(|c| c.trim().to_lowercase())
            .filter(|c| !c.is_empty())
            .collect();
        f.location_contains = self
            .location_contains
            .as_ref()
            .map(|s| s.trim().to_lowercase())
            .filter(|s| !s.is_empty());
        f
    }

    /// Assumes `self` is normalized.
    fn matches(&self, m: &Memory) -> bool {
        if !self.life_stages.is_empty() && !self.life_stages.contains(&m.life_stage) {
            return false;
        }
        let when = m.date.to_naive();
        if let Some(from) = self.date_from {
            if when < from.to_naive() {
                return false;
            }
        }
        if let Some(to) = self.date_to {
            if when > last_day_covered(to) {
                return false;
            }
        }
        if !self.categories.is_empty() && self.categories.is_disjoint(&m.categories) {
            return false;
        }
        if let Some(needle) = &self.location_contains {
            match &m.location {
                Some(loc) if loc.to_lowercase().contains(needle.as_str()) => {}
                _ => return false,
            }
        }
        if !self.related_person_ids.is_empty() && self.related_person_ids.is_disjoint(&m.related_person_ids) {
            return false;
        }
        if !self.preservation_statuses.is_empty() && !self.preservation_statuses.contains(&m.preservation_status) {
            return false;
        }
        if !self.emotion_valences.is_empty() && !self.emotion_valences.contains(&m.emotion_valence) {
            return false;
        }
        true
    }
}

/// Last calendar day inside a partial date: a year-only upper bound covers
/// the whole year, a year-month bound the whole month.
pub fn last_day_covered(d: PartialDate) -> NaiveDate {
    let year = d.year_part();
    match (d.month_part(), d.day_part()) {
        (Some(_), Some(_)) => d.to_naive(),
        (Some(m), None) => {
            let first_next = if m == 12 {
                NaiveDate::from_ymd_opt(year + 1, 1, 1)
            } else {
                NaiveDate::from_ymd_opt(year, m as u32 + 1, 1)
            };
            first_next.expect("valid month").pred_opt().expect("not min date")
        }
        (None, _) => NaiveDate::from_ymd_opt(year, 12, 31).expect("valid year"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortField {
    Date,
    Location,
    PreservationStatus,
    EmotionValence,
    RelatedPersonCount,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Asc,
    Desc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SortKey {
    pub field: SortField,
    #[serde(default)]
    pub direction: Direction,
}

impl SortKey {
    pub const DATE_ASC: SortKey = SortKey {
        field: SortField::Date,
        direction: Direction::Asc,
    };

    pub fn asc(field: SortField) -> Self {
        Self {
            field,
            direction: Direction::Asc,
        }
    }

    pub fn desc(field: SortField) -> Self {
        Self {
            field,
            direction: Direction::Desc,
        }
    }

    /// Orders by the key in the requested direction, then by id ascending.
    /// Memories without a location sort last in either direction.
    pub fn compare(&self, a: &Memory, b: &Memory) -> Ordering {
        let primary = match self.field {
            SortField::Location => match (&a.location, &b.location) {
                (None, None) => Ordering::Equal,
                (None, Some(_)) => return Ordering::Greater,
                (Some(_), None) => return Ordering::Less,
                (Some(x), Some(y)) => self.directed(x.to_lowercase().cmp(&y.to_lowercase())),
            },
            SortField::Date => self.directed(a.date.normal_form().cmp(&b.date.normal_form())),
            SortField::PreservationStatus => self.directed(a.preservation_status.cmp(&b.preservation_status)),
            SortField::EmotionValence => self.directed(a.emotion_valence.cmp(&b.emotion_valence)),
            SortField::RelatedPersonCount => self.directed(a.related_person_ids.len().cmp(&b.related_person_ids.len())),
        };
        primary.then_with(|| a.id.cmp(&b.id))
    }

    fn directed(&self, o: Ordering) -> Ordering {
        match self.direction {
            Direction::Asc => o,
            Direction::Desc => o.reverse(),
        }
    }
}

pub fn sort_memories(mut memories: Vec<Memory>, key: SortKey) -> Vec<Memory> {
    memories.sort_by(|a, b| key.compare(a, b));
    memories
}

/// Memories satisfying every clause of `filter`, date-ascending.
pub fn filter_memories<'a>(
    memories: impl IntoIterator<Item = &'a Memory>,
    filter: &MemoryFilter,
) -> Result<Vec<Memory>> {
    filter.validate()?;
    let f = filter.normalized();
    let hits = memories.into_iter().filter(|m| f.matches(m)).cloned().collect();
    Ok(sort_memories(hits, SortKey::DATE_ASC))
}

/// Case-insensitive substring search over description, location and
/// category tags, date-ascending.
pub fn search_memories<'a>(memories: impl IntoIterator<Item = &'a Memory>, query: &str) -> Result<Vec<Memory>> {
    let needle = query.trim().to_lowercase();
    if needle.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let hits = memories
        .into_iter()
        .filter(|m| {
            m.description.to_lowercase().contains(&needle)
                || m.location.as_ref().is_some_and(|l| l.to_lowercase().contains(&needle))
                || m.categories.iter().any(|c| c.contains(&needle))
        })
        .cloned()
        .collect();
    Ok(sort_memories(hits, SortKey::DATE_ASC))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelatedPersonSort {
    RelationshipType,
    #[default]
    Name,
}

/// Byte-wise order of the lowercased key, then id.
pub fn sort_related_persons(mut persons: Vec<RelatedPerson>, sort: RelatedPersonSort) -> Vec<RelatedPerson> {
    persons.sort_by(|a, b| {
        let key = |p: &RelatedPerson| match sort {
            RelatedPersonSort::RelationshipType => p.relationship_type.to_lowercase(),
            RelatedPersonSort::Name => p.display_name.to_lowercase(),
        };
        key(a).as_bytes().cmp(key(b).as_bytes()).then_with(|| a.id.cmp(&b.id))
    });
    persons
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::{MemoryId, PatientId};

    fn memory(n: u128, year: i64, stage: LifeStage, loc: Option<&str>) -> Memory {
        Memory {
            id: MemoryId::from_u128(n),
            patient_id: PatientId::from_u128(1),
            description: format!("memory {n}"),
            location: loc.map(str::to_string),
            date: PartialDate::year(year).unwrap(),
            life_stage: stage,
            categories: ["family".to_string()].into(),
            related_person_ids: BTreeSet::new(),
            preservation_status: PreservationStatus::Preserved,
            emotion_valence: EmotionValence::Neutral,
            mood_score: 5,
            media: vec![],
            record_version: 1,
        }
    }

    #[test]
    fn empty_filter_is_identity_sorted_by_date() {
        let ms = vec![
            memory(1, 1970, LifeStage::Adult, None),
            memory(2, 1940, LifeStage::Childhood, None),
            memory(3, 1955, LifeStage::Adolescence, None),
        ];
        let out = filter_memories(&ms, &MemoryFilter::default()).unwrap();
        let years: Vec<_> = out.iter().map(|m| m.date.year_part()).collect();
        assert_eq!(years, vec![1940, 1955, 1970]);
    }

    #[test]
    fn reversed_bounds_rejected() {
        let f = MemoryFilter {
            date_from: Some(PartialDate::year(1950).unwrap()),
            date_to: Some(PartialDate::year(1940).unwrap()),
            ..Default::default()
        };
        assert_eq!(filter_memories(&[], &f).unwrap_err().code(), "INVALID_FILTER");
    }

    #[test]
    fn year_upper_bound_covers_whole_year() {
        let mut m = memory(1, 1969, LifeStage::Adult, None);
        m.date = PartialDate::ym(1969, 11).unwrap();
        let f = MemoryFilter {
            date_from: Some(PartialDate::year(1960).unwrap()),
            date_to: Some(PartialDate::year(1969).unwrap()),
            ..Default::default()
        };
        assert_eq!(filter_memories([&m], &f).unwrap().len(), 1);
        assert_eq!(
            last_day_covered(PartialDate::ym(1952, 2).unwrap()),
            NaiveDate::from_ymd_opt(1952, 2, 29).unwrap()
        );
    }

    #[test]
    fn missing_location_sorts_last_both_ways() {
        let ms = vec![
            memory(1, 1970, LifeStage::Adult, None),
            memory(2, 1940, LifeStage::Childhood, Some("b")),
            memory(3, 1955, LifeStage::Adolescence, Some("A")),
        ];
        let asc = sort_memories(ms.clone(), SortKey::asc(SortField::Location));
        assert_eq!(asc.iter().map(|m| m.id.0.as_u128()).collect::<Vec<_>>(), vec![3, 2, 1]);
        let desc = sort_memories(ms, SortKey::desc(SortField::Location));
        assert_eq!(desc.iter().map(|m| m.id.0.as_u128()).collect::<Vec<_>>(), vec![2, 3, 1]);
    }

    #[test]
    fn search_rules() {
        let ms = vec![memory(1, 1970, LifeStage::Adult, Some("A Coruña"))];
        assert_eq!(search_memories(&ms, "  ").unwrap_err().code(), "EMPTY_QUERY");
        assert_eq!(search_memories(&ms, "coruña").unwrap().len(), 1);
        assert_eq!(search_memories(&ms, "FAMILY").unwrap().len(), 1);
        assert_eq!(search_memories(&ms, "memory 1").unwrap().len(), 1);
        assert!(search_memories(&ms, "ZZZ-no-match").unwrap().is_empty());
    }
}
