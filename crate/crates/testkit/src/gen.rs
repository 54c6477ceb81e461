//! Seeded random inputs. Everything takes an explicit RNG so a failing trial
//! can be replayed from its seed.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Cursor;

use chrono::{Duration, FixedOffset, NaiveDate, TimeZone};
use rand::seq::IndexedRandom;
use rand::{Rng, RngExt};
use recuerdame_core::catalog::{Direction, MemoryFilter, SortField, SortKey};
use recuerdame_core::domain::{
    AssessmentDraft, ContentHash, DateDraft, EmotionValence, InstrumentResult, LifeStage, MediaAsset, MediaKind,
    MediaMetadata, Memory, MemoryDraft, OutcomeDraft, PartialDate, PatientDraft, PreservationStatus, RelatedPerson,
    RelatedPersonDraft, ReportDraft, SessionPlan,
};
use recuerdame_core::ids::{MediaId, MemoryId, PatientId, RelatedPersonId};
use recuerdame_core::life_story::LifeStoryQuery;
use recuerdame_core::service::Clinic;

pub const CATEGORIES: [&str; 7] = ["family", "friends", "work", "hobbies", "pets", "travel", "music"];
pub const PLACES: [&str; 6] = ["Madrid", "Toledo", "Sevilla", "Bilbao", "madrid centro", "Valencia"];
const RELATIONSHIPS: [&str; 5] = ["spouse", "child", "sibling", "friend", "professional-caregiver"];
const NAMES: [&str; 8] = ["Carmen", "Luis", "Pilar", "Javier", "Rosa", "Manuel", "Elena", "Tomás"];

fn id(rng: &mut impl Rng) -> u128 {
    rng.random()
}

pub fn partial_date(rng: &mut impl Rng, years: std::ops::RangeInclusive<i64>) -> PartialDate {
    let year = rng.random_range(years);
    match rng.random_range(0..3) {
        0 => PartialDate::year(year).unwrap(),
        1 => PartialDate::ym(year, rng.random_range(1..=12)).unwrap(),
        _ => {
            let month = rng.random_range(1..=12);
            PartialDate::ymd(year, month, rng.random_range(1..=28)).unwrap()
        }
    }
}

fn subset<T: Copy + Ord>(rng: &mut impl Rng, from: &[T], p: f64) -> BTreeSet<T> {
    from.iter().copied().filter(|_| rng.random_bool(p)).collect()
}

/// A patient's catalog built directly from domain values, without a store.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub patient: PatientId,
    pub memories: Vec<Memory>,
    pub persons: BTreeMap<RelatedPersonId, RelatedPerson>,
    pub media: BTreeMap<MediaId, MediaAsset>,
}

pub fn catalog(rng: &mut impl Rng, max_memories: usize) -> Catalog {
    let patient = PatientId::from_u128(id(rng));
    let persons: BTreeMap<_, _> = (0..rng.random_range(0..6))
        .map(|i| {
            let pid = RelatedPersonId::from_u128(id(rng));
            let p = RelatedPerson {
                id: pid,
                patient_id: patient,
                display_name: format!("{} {i}", NAMES.choose(rng).unwrap()),
                relationship_type: RELATIONSHIPS.choose(rng).unwrap().to_string(),
                contact_email: None,
                profession: None,
                remarks: None,
                is_caregiver: rng.random_bool(0.3),
                record_version: 1,
            };
            (pid, p)
        })
        .collect();
    let person_ids: Vec<_> = persons.keys().copied().collect();
    let kinds = [MediaKind::Photo, MediaKind::Image, MediaKind::Audio, MediaKind::Video];
    let media: BTreeMap<_, _> = (0..rng.random_range(0..10))
        .map(|_| {
            let mid = MediaId::from_u128(id(rng));
            let kind = *kinds.choose(rng).unwrap();
            let seed: u64 = rng.random();
            let a = MediaAsset {
                id: mid,
                kind,
                content_hash: ContentHash::of(&seed.to_le_bytes()),
                media_type_label: match kind {
                    MediaKind::Photo | MediaKind::Image => "image/png",
                    MediaKind::Audio => "audio/mpeg",
                    MediaKind::Video => "video/mp4",
                }
                .to_string(),
                description: rng.random_bool(0.5).then(|| format!("asset {seed}")),
                location: None,
                date: None,
                life_stage: None,
                byte_length: 8,
            };
            (mid, a)
        })
        .collect();
    let media_ids: Vec<_> = media.keys().copied().collect();

    let n = rng.random_range(0..=max_memories);
    let memories = (0..n)
        .map(|i| {
            let mut attached: Vec<MediaId> = media_ids.iter().copied().filter(|_| rng.random_bool(0.2)).collect();
            if rng.random_bool(0.5) {
                attached.reverse();
            }
            Memory {
                id: MemoryId::from_u128(id(rng)),
                patient_id: patient,
                description: format!("Memory {i} of {}", CATEGORIES.choose(rng).unwrap()),
                location: rng.random_bool(0.7).then(|| PLACES.choose(rng).unwrap().to_string()),
                // Narrow year span so dates collide and tie-breaks matter.
                date: partial_date(rng, 1940..=1975),
                life_stage: *LifeStage::ALL.choose(rng).unwrap(),
                categories: subset(rng, &CATEGORIES, 0.25).into_iter().map(str::to_string).collect(),
                related_person_ids: subset(rng, &person_ids, 0.3),
                preservation_status: *PreservationStatus::ALL.choose(rng).unwrap(),
                emotion_valence: *EmotionValence::ALL.choose(rng).unwrap(),
                mood_score: rng.random_range(0..=10),
                media: attached,
                record_version: 1,
            }
        })
        .collect();
    Catalog {
        patient,
        memories,
        persons,
        media,
    }
}

fn date_bounds(rng: &mut impl Rng) -> (Option<PartialDate>, Option<PartialDate>) {
    let from = rng.random_bool(0.4).then(|| partial_date(rng, 1935..=1975));
    let to = rng.random_bool(0.4).then(|| partial_date(rng, 1935..=1980));
    match (from, to) {
        (Some(a), Some(b)) if a.normal_form() > b.normal_form() => (Some(b), Some(a)),
        other => other,
    }
}

/// A valid filter; clauses are present independently, each with moderate
/// probability, so both empty and near-empty results occur.
pub fn filter(rng: &mut impl Rng, catalog: &Catalog) -> MemoryFilter {
    let (date_from, date_to) = date_bounds(rng);
    let person_ids: Vec<_> = catalog.persons.keys().copied().collect();
    let cats: Vec<String> = if rng.random_bool(0.4) {
        let mut picked = Vec::new();
        for c in CATEGORIES {
            if rng.random_bool(0.3) {
                // Exercise normalization: some tags arrive padded and uppercased.
                picked.push(if rng.random_bool(0.3) {
                    format!(" {} ", c.to_uppercase())
                } else {
                    c.to_string()
                });
            }
        }
        picked
    } else {
        Vec::new()
    };
    MemoryFilter {
        life_stages: if rng.random_bool(0.4) {
            subset(rng, &LifeStage::ALL, 0.4)
        } else {
            BTreeSet::new()
        },
        date_from,
        date_to,
        categories: cats.into_iter().collect(),
        location_contains: rng.random_bool(0.25).then(|| {
            let place = PLACES.choose(rng).unwrap();
            let cut = rng.random_range(1..=place.len().min(5));
            place[..cut].to_uppercase()
        }),
        related_person_ids: if rng.random_bool(0.25) {
            subset(rng, &person_ids, 0.5)
        } else {
            BTreeSet::new()
        },
        preservation_statuses: if rng.random_bool(0.3) {
            subset(rng, &PreservationStatus::ALL, 0.5)
        } else {
            BTreeSet::new()
        },
        emotion_valences: if rng.random_bool(0.3) {
            subset(rng, &EmotionValence::ALL, 0.5)
        } else {
            BTreeSet::new()
        },
    }
}

pub fn query(rng: &mut impl Rng) -> LifeStoryQuery {
    let (date_from, date_to) = date_bounds(rng);
    LifeStoryQuery {
        life_stages: if rng.random_bool(0.5) {
            subset(rng, &LifeStage::ALL, 0.4)
        } else {
            BTreeSet::new()
        },
        date_from,
        date_to,
        categories: if rng.random_bool(0.4) {
            subset(rng, &CATEGORIES, 0.3).into_iter().map(str::to_string).collect()
        } else {
            BTreeSet::new()
        },
    }
}

pub fn sort_key(rng: &mut impl Rng) -> SortKey {
    let fields = [
        SortField::Date,
        SortField::Location,
        SortField::PreservationStatus,
        SortField::EmotionValence,
        SortField::RelatedPersonCount,
    ];
    SortKey {
        field: *fields.choose(rng).unwrap(),
        direction: if rng.random_bool(0.5) {
            Direction::Asc
        } else {
            Direction::Desc
        },
    }
}

/// A solid-colour PNG of the given size.
pub fn png(width: u32, height: u32, rgb: [u8; 3]) -> Vec<u8> {
    let img = image::RgbImage::from_pixel(width, height, image::Rgb(rgb));
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).expect("encode png");
    out.into_inner()
}

pub fn memory_draft(description: &str, stage: &str, date: DateDraft) -> MemoryDraft {
    MemoryDraft {
        description: description.to_string(),
        location: None,
        date,
        life_stage: stage.to_string(),
        categories: vec!["family".to_string()],
        related_person_ids: Vec::new(),
        preservation_status: "preserved".to_string(),
        emotion_valence: "positive".to_string(),
        mood_score: 5,
        media: Vec::new(),
    }
}

pub fn year(y: i64) -> DateDraft {
    DateDraft {
        year: y,
        month: None,
        day: None,
    }
}

/// Fills `clinic` with a random but valid dataset through the service API:
/// therapists, patients with caregivers and memories, media, sessions in
/// every state (completed ones with reports), assessments and queued mail.
pub fn populate(clinic: &Clinic, rng: &mut impl Rng) {
    let therapists: Vec<_> = (0..rng.random_range(1..=3))
        .map(|i| {
            clinic
                .register_therapist(
                    &format!("Therapist {i}"),
                    &format!("t{i}.{}@clinic.example", rng.random::<u32>()),
                )
                .unwrap()
                .0
        })
        .collect();
    let tz = FixedOffset::east_opt(3600).unwrap();
    for p in 0..rng.random_range(0..=3) {
        let assigned: Vec<_> = therapists
            .iter()
            .filter(|_| rng.random_bool(0.6))
            .map(|t| t.id)
            .collect();
        let assigned = if assigned.is_empty() {
            vec![therapists[0].id]
        } else {
            assigned
        };
        let patient = clinic
            .create_patient(PatientDraft {
                display_name: format!("{} {p}", NAMES.choose(rng).unwrap()),
                file_number: rng
                    .random_bool(0.5)
                    .then(|| format!("F-{}", rng.random_range(100..999))),
                marital_status: rng.random_bool(0.5).then(|| "widowed".to_string()),
                employment_history: None,
                leisure_interests: vec!["gardening".to_string()],
                assigned_therapists: assigned.clone(),
            })
            .unwrap();
        let mut persons = Vec::new();
        for i in 0..rng.random_range(0..3) {
            let rp = clinic
                .create_related_person(
                    patient.id,
                    RelatedPersonDraft {
                        display_name: format!("{} {i}", NAMES.choose(rng).unwrap()),
                        relationship_type: RELATIONSHIPS.choose(rng).unwrap().to_string(),
                        contact_email: rng.random_bool(0.6).then(|| format!("rp{i}@family.example")),
                        profession: None,
                        remarks: rng.random_bool(0.3).then(|| "visits on Sundays".to_string()),
                        is_caregiver: rng.random_bool(0.5),
                    },
                )
                .unwrap();
            persons.push(rp);
        }
        let mut memories = Vec::new();
        for i in 0..rng.random_range(0..6) {
            let mut draft = memory_draft(
                &format!("Memory {i} at {}", PLACES.choose(rng).unwrap()),
                LifeStage::ALL.choose(rng).unwrap().title(),
                partial_date(rng, 1940..=1990).to_draft(),
            );
            draft.related_person_ids = persons.iter().filter(|_| rng.random_bool(0.4)).map(|p| p.id).collect();
            draft.mood_score = rng.random_range(0..=10);
            let mut m = clinic.create_memory(patient.id, draft).unwrap();
            if rng.random_bool(0.4) {
                let len = rng.random_range(1..64);
                let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
                let meta = MediaMetadata {
                    kind: MediaKind::Photo,
                    media_type_label: "image/png".to_string(),
                    description: Some(format!("photo {i}")),
                    location: None,
                    date: None,
                    life_stage: None,
                };
                m = clinic.attach_media(m.id, m.record_version, &bytes, meta).unwrap().0;
            }
            memories.push(m);
        }
        for s in 0..rng.random_range(0..4) {
            let planned: Vec<_> = memories.iter().filter(|_| rng.random_bool(0.5)).map(|m| m.id).collect();
            let session = clinic
                .plan_session(
                    patient.id,
                    SessionPlan {
                        scheduled_at: tz.with_ymd_and_hms(2024, 5, 1, 10, 0, 0).unwrap() + Duration::days(s * 7),
                        objectives: format!("Objective {s}"),
                        description: "Photo review".to_string(),
                        barriers: rng.random_bool(0.5).then(|| "noise".to_string()),
                        facilitators: None,
                        activity_sequence: vec!["greeting".to_string(), "photos".to_string()],
                        session_location: Some("Room 2".to_string()),
                        planned_memory_ids: planned.clone(),
                        planned_media_ids: Vec::new(),
                    },
                )
                .unwrap();
            match rng.random_range(0..4) {
                0 => {}
                1 => {
                    clinic.cancel_session(session.id, session.record_version).unwrap();
                }
                state => {
                    let live = clinic.start_session(session.id, session.record_version).unwrap();
                    if state == 3 {
                        let draft = ReportDraft {
                            overall_impression: "Calm and engaged".to_string(),
                            memory_outcomes: planned
                                .iter()
                                .map(|m| OutcomeDraft {
                                    memory_id: *m,
                                    observed_preservation: "at risk".to_string(),
                                    emotional_reaction: "neutral".to_string(),
                                    notes: None,
                                })
                                .collect(),
                            participation_score: rng.random_range(0..=10),
                            repeat_recommended: rng.random_bool(0.5),
                            future_proposals: None,
                        };
                        clinic
                            .end_session(live.id, live.record_version, assigned[0], &draft)
                            .unwrap();
                    }
                }
            }
        }
        for a in 0..rng.random_range(0..3) {
            let score = rng.random_range(0..=30) as f64;
            clinic
                .record_assessment(
                    patient.id,
                    assigned[0],
                    &AssessmentDraft {
                        assessed_at: NaiveDate::from_ymd_opt(2024, 1 + a, 10).unwrap(),
                        diagnosis_type: "Alzheimer's disease".to_string(),
                        diagnosis_date: Some(year(2020)),
                        gds_stage: Some(rng.random_range(1..=7)),
                        instrument_results: vec![InstrumentResult {
                            instrument_name: "MMSE".to_string(),
                            score,
                            range_min: 0.0,
                            range_max: 30.0,
                        }],
                        nonstandard_instruments: None,
                        observations: Some("Oriented in person".to_string()),
                        overall_impression: "stable".to_string(),
                    },
                )
                .unwrap();
        }
        for rp in persons.iter().filter(|p| p.contact_email.is_some()) {
            if rng.random_bool(0.5) {
                clinic
                    .enqueue_email(rp.id, "Next session", "See you on Monday.")
                    .unwrap();
            }
        }
    }
}
