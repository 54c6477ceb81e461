//! PDF rendering of session reports, clinical assessments and life-story
//! books.
//!
//! Pages are A4 with 20 mm margins, set in Helvetica (base-14, WinAnsi
//! encoding). Documents are laid out by [`layout`] and serialized by
//! [`pdf`]; `structural_digest` hashes the placement stream so repeated
//! renders can be compared without caring about generation timestamps.

mod chart;
pub mod fonts;
mod layout;
mod pdf;

use std::collections::BTreeMap;

use chrono::{DateTime, FixedOffset, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::{
    ClinicalAssessment, EvolutionPoint, MediaAsset, MediaKind, Patient, Session, SessionReport, TherapistAccount,
};
use crate::error::{Error, Result};
use crate::ids::{MediaId, MemoryId, PatientId};
use crate::life_story::BookLayout;
use fonts::Font;
use layout::{Column, Layout};

pub use layout::{CONTENT_WIDTH, MARGIN, PAGE_HEIGHT, PAGE_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentKind {
    SessionReport,
    Assessment,
    LifeStoryBook,
}

impl DocumentKind {
    pub fn slug(self) -> &'static str {
        match self {
            DocumentKind::SessionReport => "session-report",
            DocumentKind::Assessment => "assessment",
            DocumentKind::LifeStoryBook => "life-story-book",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedDocument {
    pub bytes: Vec<u8>,
    pub page_count: usize,
    pub document_kind: DocumentKind,
    /// Hex SHA-256 of the placement stream with volatile text masked.
    pub structural_digest: String,
}

/// `<patient-id>_<kind>_<date>.pdf`
pub fn export_file_name(patient: PatientId, kind: DocumentKind, date: NaiveDate) -> String {
    format!("{patient}_{}_{}.pdf", kind.slug(), date.format("%Y-%m-%d"))
}

fn finish(layout: Layout, kind: DocumentKind) -> RenderedDocument {
    let doc = layout.finish();
    let structural_digest = doc.structural_digest();
    let file_id = hex::decode(&structural_digest[..32]).expect("hex digest");
    RenderedDocument {
        bytes: pdf::write_pdf(&doc, &file_id),
        page_count: doc.pages.len(),
        document_kind: kind,
        structural_digest,
    }
}

fn title(layout: &mut Layout, text: &str) {
    layout.text(text, Font::Bold, 18.0);
    layout.space(6.0);
}

fn patient_header(layout: &mut Layout, patient: &Patient) {
    layout.text(&format!("Patient: {}", patient.display_name), Font::Regular, 12.0);
    if let Some(n) = &patient.file_number {
        layout.text(&format!("File number: {n}"), Font::Regular, 10.0);
    }
    layout.rule();
}

pub fn format_timestamp(t: DateTime<FixedOffset>) -> String {
    t.format("%Y-%m-%d %H:%M (UTC%:z)").to_string()
}

pub fn format_utc(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%d %H:%M UTC").to_string()
}

/// Everything shown on a session report.
pub struct SessionReportInput<'a> {
    pub patient: &'a Patient,
    pub session: &'a Session,
    pub report: Option<&'a SessionReport>,
    /// Description of every memory named in the outcomes.
    pub memory_captions: &'a BTreeMap<MemoryId, String>,
    pub therapist: &'a TherapistAccount,
}

pub fn render_session_report(input: &SessionReportInput<'_>) -> Result<RenderedDocument> {
    let s = input.session;
    let report = input.report.ok_or_else(|| Error::ReportMissing(s.id.to_string()))?;
    let mut l = Layout::new();
    title(&mut l, "Session report");
    patient_header(&mut l, input.patient);

    l.heading("Session", 14.0);
    l.field("Date", Some(&format_timestamp(s.scheduled_at)));
    l.field("Objectives", Some(&s.objectives));
    l.field("Description", Some(&s.description));
    l.field("Barriers", s.barriers.as_deref());
    l.field("Facilitators", s.facilitators.as_deref());
    if !s.activity_sequence.is_empty() {
        let steps: Vec<String> = s
            .activity_sequence
            .iter()
            .enumerate()
            .map(|(i, a)| format!("{}. {a}", i + 1))
            .collect();
        l.field("Activity sequence", Some(&steps.join("\n")));
    }
    l.field("Location", s.session_location.as_deref());

    l.heading("Memory outcomes", 14.0);
    let columns = [
        Column {
            header: "Memory",
            fraction: 0.34,
        },
        Column {
            header: "Preservation",
            fraction: 0.18,
        },
        Column {
            header: "Emotional reaction",
            fraction: 0.18,
        },
        Column {
            header: "Notes",
            fraction: 0.30,
        },
    ];
    let rows: Vec<Vec<String>> = report
        .memory_outcomes
        .iter()
        .map(|o| {
            vec![
                input
                    .memory_captions
                    .get(&o.memory_id)
                    .cloned()
                    .unwrap_or_else(|| "(memory removed)".to_string()),
                o.observed_preservation.label().to_string(),
                o.emotional_reaction.label().to_string(),
                o.notes.clone().unwrap_or_default(),
            ]
        })
        .collect();
    if rows.is_empty() {
        l.text("No memory outcomes were recorded.", Font::Regular, 10.0);
    } else {
        l.table(&columns, &rows);
    }

    l.heading("Outcome", 14.0);
    l.field("Overall impression", Some(&report.overall_impression));
    l.field("Participation", Some(&format!("{} / 10", report.participation_score)));
    l.field(
        "Repeat recommended",
        Some(if report.repeat_recommended { "Yes" } else { "No" }),
    );
    l.field("Future proposals", report.future_proposals.as_deref());
    l.rule();
    l.text(
        &format!(
            "Therapist: {} <{}>",
            input.therapist.display_name, input.therapist.email
        ),
        Font::Regular,
        10.0,
    );
    l.text(
        &format!("Report created: {}", format_utc(report.created_at)),
        Font::Regular,
        10.0,
    );
    Ok(finish(l, DocumentKind::SessionReport))
}

/// "24 (range 0–30)"
pub fn instrument_row_text(score: f64, min: f64, max: f64) -> String {
    format!("{score} (range {min}\u{2013}{max})")
}

pub struct AssessmentInput<'a> {
    pub patient: &'a Patient,
    pub assessment: &'a ClinicalAssessment,
    pub signer: &'a TherapistAccount,
    /// Score history per instrument, keyed by the name used in this
    /// assessment.
    pub series: &'a BTreeMap<String, Vec<EvolutionPoint>>,
}

pub fn render_assessment_report(input: &AssessmentInput<'_>) -> RenderedDocument {
    let a = input.assessment;
    let mut l = Layout::new();
    title(&mut l, "Clinical assessment");
    patient_header(&mut l, input.patient);
    l.field("Assessment date", Some(&a.assessed_at.to_string()));

    l.heading("Diagnosis", 14.0);
    l.field("Diagnosis", Some(&a.diagnosis_type));
    l.field("Diagnosis date", a.diagnosis_date.map(|d| d.to_string()).as_deref());
    let gds = a
        .gds_stage
        .map_or_else(|| "not recorded".to_string(), |g| g.to_string());
    l.field("GDS stage", Some(&gds));

    l.heading("Instruments", 14.0);
    if a.instrument_results.is_empty() {
        l.text("No standardized instruments were administered.", Font::Regular, 10.0);
    } else {
        let columns = [
            Column {
                header: "Instrument",
                fraction: 0.5,
            },
            Column {
                header: "Score",
                fraction: 0.5,
            },
        ];
        let rows: Vec<Vec<String>> = a
            .instrument_results
            .iter()
            .map(|r| {
                vec![
                    r.instrument_name.clone(),
                    instrument_row_text(r.score, r.range_min, r.range_max),
                ]
            })
            .collect();
        l.table(&columns, &rows);
    }
    l.field("Non-standardized instruments", a.nonstandard_instruments.as_deref());
    l.field("Observations", a.observations.as_deref());
    l.field("Overall impression", Some(a.overall_impression.label()));

    l.rule();
    l.text(
        &format!(
            "Signed: {}, {}",
            input.signer.display_name,
            format_utc(a.signature.signed_at)
        ),
        Font::Bold,
        11.0,
    );

    let charted: Vec<_> = a
        .instrument_results
        .iter()
        .filter_map(|r| input.series.get(&r.instrument_name).map(|s| (r, s)))
        .filter(|(_, s)| s.len() >= 2)
        .collect();
    if !charted.is_empty() {
        l.heading("Evolution", 14.0);
        for (r, s) in charted {
            chart::evolution_chart(&mut l, &r.instrument_name, s);
        }
    }
    finish(l, DocumentKind::Assessment)
}

/// Supplies media records and bytes to the book renderer.
pub trait MediaResolver {
    fn resolve(&self, id: MediaId) -> Result<(MediaAsset, Vec<u8>)>;
}

impl MediaResolver for BTreeMap<MediaId, (MediaAsset, Vec<u8>)> {
    fn resolve(&self, id: MediaId) -> Result<(MediaAsset, Vec<u8>)> {
        self.get(&id)
            .cloned()
            .ok_or_else(|| Error::MediaUnresolved(id.to_string()))
    }
}

fn av_caption(asset: &MediaAsset) -> String {
    let kind = match asset.kind {
        MediaKind::Audio => "Audio",
        MediaKind::Video => "Video",
        MediaKind::Photo => "Photo",
        MediaKind::Image => "Image",
    };
    let name = asset
        .description
        .clone()
        .unwrap_or_else(|| asset.media_type_label.clone());
    format!("[{kind}] {name}")
}

/// Title page, then one chapter per life stage starting on a new page.
/// Visual media are embedded; audio and video become captioned boxes.
pub fn render_life_story_book(book: &BookLayout, media: &dyn MediaResolver) -> Result<RenderedDocument> {
    let mut l = Layout::new();
    l.space(120.0);
    l.text("Life story", Font::Bold, 28.0);
    l.space(12.0);
    l.text(&book.title_page.patient_name, Font::Bold, 20.0);
    l.space(24.0);
    l.text(&book.title_page.query_summary, Font::Regular, 12.0);
    l.text(&format!("{} memories", book.entry_count), Font::Regular, 12.0);
    l.space(12.0);
    l.volatile_text(
        &format!("Generated {}", format_utc(book.title_page.generated_at)),
        Font::Regular,
        9.0,
    );

    for chapter in &book.chapters {
        l.fresh_page();
        l.text(chapter.life_stage.title(), Font::Bold, 22.0);
        l.space(14.0);
        for entry in &chapter.entries {
            l.ensure(80.0);
            l.text(&entry.caption, Font::Bold, 12.0);
            l.text(&format!("Date: {}", entry.date), Font::Regular, 10.0);
            if let Some(loc) = &entry.location {
                l.text(&format!("Location: {loc}"), Font::Regular, 10.0);
            }
            if !entry.related_person_names.is_empty() {
                l.text(
                    &format!("With: {}", entry.related_person_names.join(", ")),
                    Font::Regular,
                    10.0,
                );
            }
            l.space(6.0);
            for id in &entry.visual_media {
                let (asset, bytes) = media.resolve(*id)?;
                if !l.image(asset.content_hash.as_str(), &bytes, 300.0) {
                    l.placeholder(&format!("{} (image could not be decoded)", av_caption(&asset)));
                }
                if let Some(d) = &asset.description {
                    l.text(d, Font::Regular, 9.0);
                    l.space(4.0);
                }
            }
            for id in &entry.av_media {
                let (asset, _) = media.resolve(*id)?;
                l.placeholder(&av_caption(&asset));
            }
            l.space(14.0);
        }
    }
    Ok(finish(l, DocumentKind::LifeStoryBook))
}
