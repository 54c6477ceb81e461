//! Life-story selection and the two renderings built from it: a chaptered
//! book layout and a slideshow storyboard.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::{filter_memories, MemoryFilter};
use crate::domain::{ContentHash, LifeStage, MediaAsset, MediaKind, Memory, PartialDate, Patient, RelatedPerson};
use crate::error::Result;
use crate::ids::{MediaId, MemoryId, RelatedPersonId};

/// Default on-screen time for each slide, in seconds.
pub const DEFAULT_SLIDE_SECONDS: f64 = 5.0;

/// The subset of [`MemoryFilter`] a life story can be narrowed by.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifeStoryQuery {
    #[serde(default)]
    pub life_stages: BTreeSet<LifeStage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_from: Option<PartialDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_to: Option<PartialDate>,
    #[serde(default)]
    pub categories: BTreeSet<String>,
}

impl LifeStoryQuery {
    pub fn to_filter(&self) -> MemoryFilter {
        MemoryFilter {
            life_stages: self.life_stages.clone(),
            date_from: self.date_from,
            date_to: self.date_to,
            categories: self.categories.clone(),
            ..Default::default()
        }
    }

    /// One-line human description for the title page.
    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        if !self.life_stages.is_empty() {
            let stages: Vec<_> = self.life_stages.iter().map(|s| s.title()).collect();
            parts.push(format!("Life stages: {}", stages.join(", ")));
        }
        match (self.date_from, self.date_to) {
            (Some(a), Some(b)) => parts.push(format!("Dates: {a} to {b}")),
            (Some(a), None) => parts.push(format!("Dates: from {a}")),
            (None, Some(b)) => parts.push(format!("Dates: until {b}")),
            (None, None) => {}
        }
        if !self.categories.is_empty() {
            let cats: Vec<_> = self.categories.iter().map(|c| c.trim().to_lowercase()).collect();
            parts.push(format!("Categories: {}", cats.join(", ")));
        }
        if parts.is_empty() {
            "All memories".to_string()
        } else {
            parts.join("; ")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryEntry {
    pub memory_id: MemoryId,
    pub date: PartialDate,
    pub life_stage: LifeStage,
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    pub visual_media: Vec<MediaId>,
    pub av_media: Vec<MediaId>,
    pub related_person_names: Vec<String>,
}

/// Ordering used for life-story entries: life stage, then date, then id.
pub fn story_order(a: &StoryEntry, b: &StoryEntry) -> std::cmp::Ordering {
    a.life_stage
        .cmp(&b.life_stage)
        .then(a.date.normal_form().cmp(&b.date.normal_form()))
        .then(a.memory_id.cmp(&b.memory_id))
}

pub fn select_story_entries<'a>(
    memories: impl IntoIterator<Item = &'a Memory>,
    persons: &BTreeMap<RelatedPersonId, RelatedPerson>,
    media: &BTreeMap<MediaId, MediaAsset>,
    query: &LifeStoryQuery,
) -> Result<Vec<StoryEntry>> {
    let selected = filter_memories(memories, &query.to_filter())?;
    let mut entries: Vec<StoryEntry> = selected.iter().map(|m| to_entry(m, persons, media)).collect();
    entries.sort_by(story_order);
    Ok(entries)
}

fn to_entry(
    m: &Memory,
    persons: &BTreeMap<RelatedPersonId, RelatedPerson>,
    media: &BTreeMap<MediaId, MediaAsset>,
) -> StoryEntry {
    let mut visual_media = Vec::new();
    let mut av_media = Vec::new();
    for id in &m.media {
        match media.get(id) {
            Some(asset) if asset.kind.is_visual() => visual_media.push(*id),
            Some(_) => av_media.push(*id),
            None => {}
        }
    }
    StoryEntry {
        memory_id: m.id,
        date: m.date,
        life_stage: m.life_stage,
        caption: m.description.clone(),
        location: m.location.clone(),
        visual_media,
        av_media,
        related_person_names: m
            .related_person_ids
            .iter()
            .filter_map(|id| persons.get(id).map(|p| p.display_name.clone()))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitlePage {
    pub patient_name: String,
    pub generated_at: DateTime<Utc>,
    pub query_summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chapter {
    pub life_stage: LifeStage,
    pub entries: Vec<StoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookLayout {
    pub title_page: TitlePage,
    pub chapters: Vec<Chapter>,
    pub entry_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookOptions {
    /// Keep audio/video references so the renderer can draw captioned
    /// placeholder boxes for them.
    pub include_av_placeholders: bool,
    pub query_summary: String,
}

impl Default for BookOptions {
    fn default() -> Self {
        Self {
            include_av_placeholders: true,
            query_summary: "All memories".to_string(),
        }
    }
}

/// Groups entries into life-stage chapters. Entries are re-sorted so the
/// layout invariants hold even if the caller passes them out of order.
pub fn compose_book(
    patient: &Patient,
    entries: &[StoryEntry],
    options: &BookOptions,
    generated_at: DateTime<Utc>,
) -> BookLayout {
    let mut sorted = entries.to_vec();
    sorted.sort_by(story_order);
    let mut chapters: Vec<Chapter> = Vec::new();
    for mut entry in sorted {
        if !options.include_av_placeholders {
            entry.av_media.clear();
        }
        match chapters.last_mut() {
            Some(ch) if ch.life_stage == entry.life_stage => ch.entries.push(entry),
            _ => chapters.push(Chapter {
                life_stage: entry.life_stage,
                entries: vec![entry],
            }),
        }
    }
    BookLayout {
        title_page: TitlePage {
            patient_name: patient.display_name.clone(),
            generated_at,
            query_summary: options.query_summary.clone(),
        },
        entry_count: chapters.iter().map(|c| c.entries.len()).sum(),
        chapters,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlideKind {
    TitleCard,
    MemoryCard,
    MediaSlide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slide {
    pub kind: SlideKind,
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_ref: Option<ContentHash>,
    pub duration_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryboardManifest {
    pub slides: Vec<Slide>,
    pub audio_track_refs: Vec<ContentHash>,
    /// Video clips in entry order; the player shows them after the slides
    /// of the memory they belong to.
    #[serde(default)]
    pub video_refs: Vec<ContentHash>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoryboardOptions {
    pub slide_seconds: f64,
}

impl Default for StoryboardOptions {
    fn default() -> Self {
        Self {
            slide_seconds: DEFAULT_SLIDE_SECONDS,
        }
    }
}

/// Title card, then for each entry a memory card followed by one media slide
/// per visual asset. Audio assets become the soundtrack in entry order.
/// A non-positive or non-finite slide duration falls back to the default.
pub fn compose_storyboard(
    patient: &Patient,
    entries: &[StoryEntry],
    media: &BTreeMap<MediaId, MediaAsset>,
    options: &StoryboardOptions,
) -> StoryboardManifest {
    let secs = if options.slide_seconds.is_finite() && options.slide_seconds > 0.0 {
        options.slide_seconds
    } else {
        DEFAULT_SLIDE_SECONDS
    };
    let mut slides = vec![Slide {
        kind: SlideKind::TitleCard,
        caption: format!("{}: life story", patient.display_name),
        media_ref: None,
        duration_seconds: secs,
    }];
    let mut audio_track_refs = Vec::new();
    let mut video_refs = Vec::new();
    for entry in entries {
        slides.push(Slide {
            kind: SlideKind::MemoryCard,
            caption: memory_card_caption(entry),
            media_ref: None,
            duration_seconds: secs,
        });
        for id in &entry.visual_media {
            let Some(asset) = media.get(id) else { continue };
            slides.push(Slide {
                kind: SlideKind::MediaSlide,
                caption: asset.description.clone().unwrap_or_else(|| entry.caption.clone()),
                media_ref: Some(asset.content_hash.clone()),
                duration_seconds: secs,
            });
        }
        for id in &entry.av_media {
            let Some(asset) = media.get(id) else { continue };
            match asset.kind {
                MediaKind::Audio => audio_track_refs.push(asset.content_hash.clone()),
                MediaKind::Video => video_refs.push(asset.content_hash.clone()),
                MediaKind::Photo | MediaKind::Image => {}
            }
        }
    }
    StoryboardManifest {
        slides,
        audio_track_refs,
        video_refs,
    }
}

fn memory_card_caption(entry: &StoryEntry) -> String {
    match &entry.location {
        Some(loc) => format!("{} ({}, {})", entry.caption, entry.date, loc),
        None => format!("{} ({})", entry.caption, entry.date),
    }
}
