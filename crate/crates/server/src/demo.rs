//! A small, fixed dataset for trying the service out.

use std::io::Cursor;

use chrono::{Duration, FixedOffset, TimeZone};
use image::{ImageFormat, Rgb, RgbImage};
use recuerdame_core::domain::{
    AssessmentDraft, DateDraft, InstrumentResult, MediaKind, MediaMetadata, MemoryDraft, PatientDraft,
    RelatedPersonDraft, SessionPlan,
};
use recuerdame_core::ids::{PatientId, TherapistId};
use recuerdame_core::service::Clinic;
use serde::Serialize;

pub const DEMO_FILE_NUMBER: &str = "DEMO-0001";

#[derive(Debug, Serialize)]
pub struct DemoSummary {
    pub patient_id: PatientId,
    pub created: bool,
    pub memories: usize,
    pub media: usize,
}

/// A vertical gradient between two colours, as PNG.
fn gradient_png(top: [u8; 3], bottom: [u8; 3]) -> Vec<u8> {
    let (w, h) = (320u32, 240u32);
    let img = RgbImage::from_fn(w, h, |_, y| {
        let t = y as f32 / (h - 1) as f32;
        let mix = |a: u8, b: u8| (a as f32 + (b as f32 - a as f32) * t).round() as u8;
        Rgb([mix(top[0], bottom[0]), mix(top[1], bottom[1]), mix(top[2], bottom[2])])
    });
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("in-memory PNG encoding");
    out.into_inner()
}

fn date(year: i64, month: Option<i64>) -> DateDraft {
    DateDraft { year, month, day: None }
}

/// Creates the demo patient for `therapist` unless one already exists.
pub fn seed(clinic: &Clinic, therapist: TherapistId) -> recuerdame_core::Result<DemoSummary> {
    if let Some(p) = clinic
        .patients_of(therapist)
        .into_iter()
        .find(|p| p.file_number.as_deref() == Some(DEMO_FILE_NUMBER))
    {
        let memories =
            clinic.filter_memories(p.id, &Default::default(), recuerdame_core::catalog::SortKey::DATE_ASC)?;
        return Ok(DemoSummary {
            patient_id: p.id,
            created: false,
            memories: memories.len(),
            media: memories.iter().map(|m| m.media.len()).sum(),
        });
    }

    let patient = clinic.create_patient(PatientDraft {
        display_name: "Dolores Fernández".to_string(),
        file_number: Some(DEMO_FILE_NUMBER.to_string()),
        marital_status: Some("widowed".to_string()),
        employment_history: Some("Seamstress in A Coruña, later ran a haberdashery".to_string()),
        leisure_interests: vec!["dancing".to_string(), "gardening".to_string()],
        assigned_therapists: vec![therapist],
    })?;
    let daughter = clinic.create_related_person(
        patient.id,
        RelatedPersonDraft {
            display_name: "Lucía Fernández".to_string(),
            relationship_type: "daughter".to_string(),
            contact_email: Some("lucia@family.example".to_string()),
            is_caregiver: true,
            ..Default::default()
        },
    )?;

    let memories = [
        (
            "First communion at Santa María",
            "childhood",
            date(1948, Some(5)),
            "religion",
            [230, 220, 190],
            [120, 110, 90],
        ),
        (
            "Summer dances at the village fiesta",
            "adolescence",
            date(1955, Some(8)),
            "music",
            [250, 180, 90],
            [90, 40, 120],
        ),
        (
            "Opening the haberdashery on Calle Real",
            "adult",
            date(1972, None),
            "work",
            [80, 140, 200],
            [20, 40, 80],
        ),
        (
            "Lucía's wedding",
            "older adult",
            date(1994, Some(6)),
            "family",
            [240, 240, 250],
            [160, 170, 200],
        ),
    ];
    let mut media = 0;
    let mut ids = Vec::new();
    for (i, (description, stage, when, category, top, bottom)) in memories.into_iter().enumerate() {
        let m = clinic.create_memory(
            patient.id,
            MemoryDraft {
                description: description.to_string(),
                location: Some("Galicia".to_string()),
                date: when,
                life_stage: stage.to_string(),
                categories: vec![category.to_string()],
                related_person_ids: if i == 3 { vec![daughter.id] } else { vec![] },
                preservation_status: if i == 0 { "at risk" } else { "preserved" }.to_string(),
                emotion_valence: "positive".to_string(),
                mood_score: 6 + i as i64,
                media: vec![],
            },
        )?;
        let (m, _) = clinic.attach_media(
            m.id,
            m.record_version,
            &gradient_png(top, bottom),
            MediaMetadata {
                kind: MediaKind::Photo,
                media_type_label: "image/png".to_string(),
                description: Some(description.to_string()),
                location: None,
                date: None,
                life_stage: None,
            },
        )?;
        media += 1;
        ids.push(m.id);
    }

    let cet = FixedOffset::east_opt(3600).expect("valid offset");
    let next_week = clinic.now().with_timezone(&cet) + Duration::days(7);
    let at = cet
        .from_local_datetime(&next_week.date_naive().and_hms_opt(10, 30, 0).expect("valid time"))
        .single()
        .expect("fixed offsets are unambiguous");
    clinic.plan_session(
        patient.id,
        SessionPlan {
            scheduled_at: at,
            objectives: "Revisit the fiesta and the shop opening".to_string(),
            description: "Photo-guided conversation".to_string(),
            barriers: None,
            facilitators: Some("Music from the period".to_string()),
            activity_sequence: vec!["Greeting".to_string(), "Photos".to_string(), "Song".to_string()],
            session_location: Some("Room 2".to_string()),
            planned_memory_ids: ids[1..3].to_vec(),
            planned_media_ids: vec![],
        },
    )?;
    clinic.record_assessment(
        patient.id,
        therapist,
        &AssessmentDraft {
            assessed_at: clinic.now().date_naive(),
            diagnosis_type: "Alzheimer's disease".to_string(),
            diagnosis_date: Some(date(2021, Some(3))),
            gds_stage: Some(4),
            instrument_results: vec![InstrumentResult {
                instrument_name: "MMSE".to_string(),
                score: 21.0,
                range_min: 0.0,
                range_max: 30.0,
            }],
            nonstandard_instruments: None,
            observations: Some("Enjoys music; oriented to person".to_string()),
            overall_impression: "remains stable".to_string(),
        },
    )?;
    Ok(DemoSummary {
        patient_id: patient.id,
        created: true,
        memories: ids.len(),
        media,
    })
}
