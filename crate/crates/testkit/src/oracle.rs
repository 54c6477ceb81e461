//! Reference implementations written from the query contract alone. They
//! favour obviousness over speed: every predicate is a linear scan and every
//! ordering an explicit comparator.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use recuerdame_core::catalog::{Direction, MemoryFilter, SortField, SortKey};
use recuerdame_core::domain::{
    ClinicalAssessment, EmotionValence, LifeStage, MediaAsset, MediaKind, Memory, PartialDate, PreservationStatus,
    RelatedPerson,
};
use recuerdame_core::ids::{MediaId, RelatedPersonId};
use recuerdame_core::life_story::{LifeStoryQuery, StoryEntry};
use sha2::{Digest, Sha256};

fn is_leap(y: i32) -> bool {
    (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
}

fn days_in_month(y: i32, m: u8) -> u8 {
    match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(y) => 29,
        2 => 28,
        _ => unreachable!("month {m}"),
    }
}

/// (year, month, day) with missing parts filled in as 1.
pub fn lower_tuple(d: PartialDate) -> (i32, u8, u8) {
    (d.year_part(), d.month_part().unwrap_or(1), d.day_part().unwrap_or(1))
}

/// Last (year, month, day) a partial date covers.
pub fn upper_tuple(d: PartialDate) -> (i32, u8, u8) {
    let y = d.year_part();
    let m = d.month_part().unwrap_or(12);
    (y, m, d.day_part().unwrap_or_else(|| days_in_month(y, m)))
}

fn preservation_rank(p: PreservationStatus) -> u8 {
    match p {
        PreservationStatus::Preserved => 0,
        PreservationStatus::AtRisk => 1,
        PreservationStatus::Lost => 2,
    }
}

fn valence_rank(v: EmotionValence) -> u8 {
    match v {
        EmotionValence::Positive => 0,
        EmotionValence::Neutral => 1,
        EmotionValence::Negative => 2,
    }
}

fn stage_rank(s: LifeStage) -> u8 {
    match s {
        LifeStage::Childhood => 0,
        LifeStage::Adolescence => 1,
        LifeStage::YoungAdult => 2,
        LifeStage::Adult => 3,
        LifeStage::OlderAdult => 4,
    }
}

/// Does `m` satisfy every clause of `f`? Tags and the location needle are
/// compared after trimming and lowercasing.
pub fn memory_matches(f: &MemoryFilter, m: &Memory) -> bool {
    let stage_ok = f.life_stages.is_empty() || f.life_stages.iter().any(|s| *s == m.life_stage);
    let from_ok = f.date_from.is_none_or(|d| lower_tuple(m.date) >= lower_tuple(d));
    let to_ok = f.date_to.is_none_or(|d| lower_tuple(m.date) <= upper_tuple(d));
    let wanted: Vec<String> = f
        .categories
        .iter()
        .map(|c| c.trim().to_lowercase())
        .filter(|c| !c.is_empty())
        .collect();
    let cat_ok = wanted.is_empty() || wanted.iter().any(|c| m.categories.iter().any(|x| x == c));
    let needle = f
        .location_contains
        .as_deref()
        .map(|s| s.trim().to_lowercase())
        .filter(|s| !s.is_empty());
    let loc_ok = match needle {
        None => true,
        Some(n) => m.location.as_deref().is_some_and(|l| l.to_lowercase().contains(&n)),
    };
    let rp_ok =
        f.related_person_ids.is_empty() || f.related_person_ids.iter().any(|r| m.related_person_ids.contains(r));
    let pres_ok = f.preservation_statuses.is_empty() || f.preservation_statuses.contains(&m.preservation_status);
    let emo_ok = f.emotion_valences.is_empty() || f.emotion_valences.contains(&m.emotion_valence);
    stage_ok && from_ok && to_ok && cat_ok && loc_ok && rp_ok && pres_ok && emo_ok
}

/// The reference comparator for [`SortKey`]: primary key in the requested
/// direction (memories without a location always last), then id.
pub fn compare_by(key: SortKey, a: &Memory, b: &Memory) -> Ordering {
    let flip = |o: Ordering| {
        if key.direction == Direction::Desc {
            o.reverse()
        } else {
            o
        }
    };
    let primary = match key.field {
        SortField::Date => flip(lower_tuple(a.date).cmp(&lower_tuple(b.date))),
        SortField::PreservationStatus => {
            flip(preservation_rank(a.preservation_status).cmp(&preservation_rank(b.preservation_status)))
        }
        SortField::EmotionValence => flip(valence_rank(a.emotion_valence).cmp(&valence_rank(b.emotion_valence))),
        SortField::RelatedPersonCount => flip(a.related_person_ids.len().cmp(&b.related_person_ids.len())),
        SortField::Location => match (a.location.as_deref(), b.location.as_deref()) {
            (Some(x), Some(y)) => flip(x.to_lowercase().as_bytes().cmp(y.to_lowercase().as_bytes())),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        },
    };
    primary.then(a.id.0.as_u128().cmp(&b.id.0.as_u128()))
}

/// Insertion sort with [`compare_by`]; deliberately not `slice::sort_by`.
pub fn sort_oracle(memories: &[Memory], key: SortKey) -> Vec<Memory> {
    let mut out: Vec<Memory> = Vec::with_capacity(memories.len());
    for m in memories {
        let pos = out
            .iter()
            .position(|x| compare_by(key, m, x) == Ordering::Less)
            .unwrap_or(out.len());
        out.insert(pos, m.clone());
    }
    out
}

pub fn filter_oracle(memories: &[Memory], f: &MemoryFilter, key: SortKey) -> Vec<Memory> {
    let hits: Vec<Memory> = memories.iter().filter(|m| memory_matches(f, m)).cloned().collect();
    sort_oracle(&hits, key)
}

pub fn search_oracle(memories: &[Memory], query: &str) -> Vec<Memory> {
    let q = query.trim().to_lowercase();
    let hits: Vec<Memory> = memories
        .iter()
        .filter(|m| {
            let mut hay = vec![m.description.to_lowercase()];
            hay.extend(m.location.iter().map(|l| l.to_lowercase()));
            hay.extend(m.categories.iter().cloned());
            hay.iter().any(|h| h.contains(&q))
        })
        .cloned()
        .collect();
    sort_oracle(&hits, SortKey::DATE_ASC)
}

/// Entries for `query`, in (stage, date, id) order, built field by field.
pub fn story_oracle(
    memories: &[Memory],
    persons: &BTreeMap<RelatedPersonId, RelatedPerson>,
    media: &BTreeMap<MediaId, MediaAsset>,
    query: &LifeStoryQuery,
) -> Vec<StoryEntry> {
    let filter = MemoryFilter {
        life_stages: query.life_stages.clone(),
        date_from: query.date_from,
        date_to: query.date_to,
        categories: query.categories.clone(),
        ..MemoryFilter::default()
    };
    let mut hits: Vec<&Memory> = memories.iter().filter(|m| memory_matches(&filter, m)).collect();
    hits.sort_by_key(|m| (stage_rank(m.life_stage), lower_tuple(m.date), m.id.0.as_u128()));
    hits.into_iter()
        .map(|m| {
            let kinds: Vec<(MediaId, MediaKind)> = m
                .media
                .iter()
                .filter_map(|id| media.get(id).map(|a| (*id, a.kind)))
                .collect();
            StoryEntry {
                memory_id: m.id,
                date: m.date,
                life_stage: m.life_stage,
                caption: m.description.clone(),
                location: m.location.clone(),
                visual_media: kinds
                    .iter()
                    .filter(|(_, k)| matches!(k, MediaKind::Photo | MediaKind::Image))
                    .map(|(id, _)| *id)
                    .collect(),
                av_media: kinds
                    .iter()
                    .filter(|(_, k)| matches!(k, MediaKind::Audio | MediaKind::Video))
                    .map(|(id, _)| *id)
                    .collect(),
                related_person_names: m
                    .related_person_ids
                    .iter()
                    .filter_map(|id| persons.get(id).map(|p| p.display_name.clone()))
                    .collect(),
            }
        })
        .collect()
}

/// Slides a storyboard must contain: one title card plus, per entry, a
/// memory card and one slide per visual asset.
pub fn expected_slide_count(entries: &[StoryEntry]) -> usize {
    1 + entries.iter().map(|e| 1 + e.visual_media.len()).sum::<usize>()
}

/// (date, score, min, max) of every assessment that reports `instrument`,
/// ordered by date then id.
pub fn evolution_oracle(
    assessments: &[ClinicalAssessment],
    instrument: &str,
) -> Vec<(chrono::NaiveDate, f64, f64, f64)> {
    let key = instrument.trim().to_lowercase();
    let mut rows: Vec<(chrono::NaiveDate, u128, f64, f64, f64)> = Vec::new();
    for a in assessments {
        for r in &a.instrument_results {
            if r.instrument_name.trim().to_lowercase() == key {
                rows.push((a.assessed_at, a.id.0.as_u128(), r.score, r.range_min, r.range_max));
                break;
            }
        }
    }
    rows.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.cmp(&y.1)));
    rows.into_iter().map(|(d, _, s, lo, hi)| (d, s, lo, hi)).collect()
}

/// Lowercase hex SHA-256, computed here rather than through the store.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calendar_edges() {
        assert_eq!(days_in_month(2000, 2), 29);
        assert_eq!(days_in_month(1900, 2), 28);
        assert_eq!(days_in_month(2024, 2), 29);
        let y = PartialDate::year(1969).unwrap();
        assert_eq!(upper_tuple(y), (1969, 12, 31));
        let ym = PartialDate::ym(1969, 4).unwrap();
        assert_eq!(upper_tuple(ym), (1969, 4, 30));
        assert_eq!(lower_tuple(ym), (1969, 4, 1));
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
