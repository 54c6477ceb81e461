//! Randomized property runs shared by the per-crate suites and the
//! acceptance target. Each returns summary counts on success and a
//! description of the first counterexample (with its seed) on failure.

use std::collections::BTreeMap;
use std::io::{Cursor, Read, Write};
use std::sync::Arc;

use chrono::{Duration, FixedOffset, TimeZone};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{RngExt, SeedableRng};
use recuerdame_core::catalog::{self, SortKey};
use recuerdame_core::clock::ManualClock;
use recuerdame_core::domain::{
    DateDraft, MediaKind, MediaMetadata, MemoryPatch, OutcomeDraft, PatientDraft, ReportDraft, Session, SessionStatus,
};
use recuerdame_core::error::Error;
use recuerdame_core::ids::{MemoryId, SessionId};
use recuerdame_core::life_story::{self, StoryboardOptions};
use recuerdame_core::service::{Amendment, Clinic, END_SESSION_FAULT_POINT};
use recuerdame_core::store::archive::{export_archive, import_archive, ExportScope, ImportMode};
use recuerdame_core::store::{Database, Store};

use crate::fixture::{epoch, plan};
use crate::{gen, oracle};

#[derive(Debug, Default, Clone, Copy)]
pub struct FilterStats {
    pub trials: usize,
    pub memories_scanned: usize,
    pub matches: usize,
}

/// Engine filter, sort, search and story selection against the oracles
/// on `trials` random catalogs of up to 200 memories.
pub fn filter_equivalence(seed: u64, trials: usize) -> Result<FilterStats, String> {
    let mut stats = FilterStats::default();
    for t in 0..trials {
        let trial_seed = seed.wrapping_add(t as u64);
        let mut rng = StdRng::seed_from_u64(trial_seed);
        let cat = gen::catalog(&mut rng, 200);
        let f = gen::filter(&mut rng, &cat);
        let key = gen::sort_key(&mut rng);

        let got = catalog::filter_memories(&cat.memories, &f).map_err(|e| format!("seed {trial_seed}: {e}"))?;
        let want = oracle::filter_oracle(&cat.memories, &f, SortKey::DATE_ASC);
        if got != want {
            return Err(format!(
                "seed {trial_seed}: filter returned {} memories, oracle {}",
                got.len(),
                want.len()
            ));
        }
        let sorted = catalog::sort_memories(got.clone(), key);
        if sorted != oracle::sort_oracle(&got, key) {
            return Err(format!("seed {trial_seed}: sort by {key:?} disagrees with oracle"));
        }

        let needle = *gen::PLACES.choose(&mut rng).unwrap();
        let needle = &needle[..rng.random_range(1..=needle.len())];
        let hits = catalog::search_memories(&cat.memories, needle).map_err(|e| e.to_string())?;
        if hits != oracle::search_oracle(&cat.memories, needle) {
            return Err(format!("seed {trial_seed}: search {needle:?} disagrees with oracle"));
        }

        let q = gen::query(&mut rng);
        let entries = life_story::select_story_entries(&cat.memories, &cat.persons, &cat.media, &q)
            .map_err(|e| format!("seed {trial_seed}: {e}"))?;
        if entries != oracle::story_oracle(&cat.memories, &cat.persons, &cat.media, &q) {
            return Err(format!("seed {trial_seed}: story selection disagrees with oracle"));
        }

        stats.trials += 1;
        stats.memories_scanned += cat.memories.len();
        stats.matches += want.len();
    }
    Ok(stats)
}

/// Slide-count identity and structure on `count` random storyboards.
pub fn storyboard_identity(seed: u64, count: usize) -> Result<usize, String> {
    for i in 0..count {
        let s = seed.wrapping_add(i as u64);
        let mut rng = StdRng::seed_from_u64(s);
        let cat = gen::catalog(&mut rng, 40);
        let q = gen::query(&mut rng);
        let entries =
            life_story::select_story_entries(&cat.memories, &cat.persons, &cat.media, &q).map_err(|e| e.to_string())?;
        let patient = recuerdame_core::domain::Patient {
            id: cat.patient,
            display_name: "Test".to_string(),
            file_number: None,
            marital_status: None,
            employment_history: None,
            leisure_interests: Vec::new(),
            assigned_therapists: Default::default(),
            record_version: 1,
        };
        let opts = StoryboardOptions {
            slide_seconds: rng.random_range(1.0..10.0),
        };
        let board = life_story::compose_storyboard(&patient, &entries, &cat.media, &opts);
        let want = oracle::expected_slide_count(&entries);
        if board.slides.len() != want {
            return Err(format!("seed {s}: {} slides, expected {want}", board.slides.len()));
        }
        if board.slides[0].kind != life_story::SlideKind::TitleCard {
            return Err(format!("seed {s}: first slide is not a title card"));
        }
        let cards = board
            .slides
            .iter()
            .filter(|sl| sl.kind == life_story::SlideKind::MemoryCard)
            .count();
        if cards != entries.len() {
            return Err(format!("seed {s}: {cards} memory cards for {} entries", entries.len()));
        }
        let audio: usize = entries
            .iter()
            .flat_map(|e| &e.av_media)
            .filter(|id| cat.media[id].kind == recuerdame_core::domain::MediaKind::Audio)
            .count();
        if board.audio_track_refs.len() != audio {
            return Err(format!(
                "seed {s}: audio tracks {} != {audio}",
                board.audio_track_refs.len()
            ));
        }
        let hashes: std::collections::BTreeSet<_> = cat.media.values().map(|a| &a.content_hash).collect();
        if board
            .slides
            .iter()
            .filter_map(|sl| sl.media_ref.as_ref())
            .any(|h| !hashes.contains(h))
        {
            return Err(format!("seed {s}: media slide references an unknown asset"));
        }
    }
    Ok(count)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct MachineStats {
    pub sequences: usize,
    pub events: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub faults_injected: usize,
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Plan,
    Start,
    Cancel,
    Reschedule,
    AmendAdd,
    AmendModify,
    End,
    EndWithFault,
    EndUnworked,
}

const EVENTS: [Event; 9] = [
    Event::Plan,
    Event::Start,
    Event::Cancel,
    Event::Reschedule,
    Event::AmendAdd,
    Event::AmendModify,
    Event::End,
    Event::EndWithFault,
    Event::EndUnworked,
];

fn legal(from: SessionStatus, to: SessionStatus) -> bool {
    use SessionStatus::*;
    from == to
        || matches!(
            (from, to),
            (Planned, InProgress) | (Planned, Cancelled) | (InProgress, Completed)
        )
}

/// Invariants over the whole store after an event, given the state before.
fn check_sessions(before: &Database, after: &Database) -> Result<(), String> {
    for s in after.sessions.values() {
        let has_report = after.session_reports.contains(s.id);
        if has_report != (s.status == SessionStatus::Completed) {
            return Err(format!("session {} is {:?} with report={has_report}", s.id, s.status));
        }
        if !s.amendment_log.is_empty() && !matches!(s.status, SessionStatus::InProgress | SessionStatus::Completed) {
            return Err(format!("session {} has amendments while {:?}", s.id, s.status));
        }
        if s.amendment_log.windows(2).any(|w| w[0].at > w[1].at) {
            return Err(format!("session {} amendment log out of order", s.id));
        }
        if let Some(old) = before.sessions.get(s.id) {
            if !legal(old.status, s.status) {
                return Err(format!("illegal transition {:?} -> {:?}", old.status, s.status));
            }
            if s.amendment_log.len() < old.amendment_log.len()
                || s.amendment_log[..old.amendment_log.len()] != old.amendment_log[..]
            {
                return Err(format!("session {} amendment log was rewritten", s.id));
            }
        }
    }
    for r in after.session_reports.values() {
        if !after.sessions.contains(r.session_id) {
            return Err("report without session".to_string());
        }
    }
    Ok(())
}

/// Random event sequences over plan/start/amend/end/reschedule/cancel,
/// including stale versions and a fault injected inside `end_session`.
pub fn session_machine(seed: u64, sequences: usize) -> Result<MachineStats, String> {
    let media_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut stats = MachineStats::default();
    let tz = FixedOffset::east_opt(7200).unwrap();
    for n in 0..sequences {
        let s = seed.wrapping_add(n as u64);
        let mut rng = StdRng::seed_from_u64(s);
        let clock = ManualClock::new(epoch());
        let store = Arc::new(Store::in_memory(media_dir.path()).map_err(|e| e.to_string())?);
        let clinic = Clinic::new(store.clone(), Arc::new(clock.clone()));
        let (t, _) = clinic.register_therapist("T", "t@clinic.example").unwrap();
        let p = clinic
            .create_patient(PatientDraft {
                display_name: "P".to_string(),
                assigned_therapists: vec![t.id],
                ..PatientDraft::default()
            })
            .unwrap();
        let mut memories: Vec<MemoryId> = (0..3)
            .map(|i| {
                clinic
                    .create_memory(p.id, gen::memory_draft(&format!("m{i}"), "adult", gen::year(1970 + i)))
                    .unwrap()
                    .id
            })
            .collect();
        let mut sessions: Vec<SessionId> = Vec::new();

        for _ in 0..rng.random_range(1..=16) {
            clock.advance(Duration::seconds(rng.random_range(0..120)));
            let event = *EVENTS.choose(&mut rng).unwrap();
            let before = store.snapshot();
            let target: Option<Session> = sessions
                .choose(&mut rng)
                .and_then(|id| before.sessions.get(*id).cloned());
            let stale = rng.random_bool(0.1);
            let version = |s: &Session| if stale { s.record_version + 1 } else { s.record_version };
            let mut fault = false;

            let result: Result<(), Error> = match (event, &target) {
                (Event::Plan, _) | (_, None) => {
                    let chosen: Vec<_> = memories.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
                    clinic.plan_session(p.id, plan(chosen)).map(|s| sessions.push(s.id))
                }
                (Event::Start, Some(s)) => clinic.start_session(s.id, version(s)).map(drop),
                (Event::Cancel, Some(s)) => clinic.cancel_session(s.id, version(s)).map(drop),
                (Event::Reschedule, Some(s)) => {
                    let at = tz
                        .with_ymd_and_hms(2024, 6, rng.random_range(1..=28), 10, 0, 0)
                        .unwrap();
                    clinic.reschedule_session(s.id, version(s), at).map(drop)
                }
                (Event::AmendAdd, Some(s)) => clinic
                    .amend_memory_in_session(
                        s.id,
                        version(s),
                        Amendment::AddMemory {
                            memory: gen::memory_draft("recalled live", "youngadult", gen::year(1965)),
                        },
                    )
                    .map(|o| memories.push(o.memory.id)),
                (Event::AmendModify, Some(s)) => {
                    let mid = *memories.choose(&mut rng).unwrap();
                    let mv = before.memories.get(mid).map_or(1, |m| m.record_version);
                    let status = ["preserved", "at risk", "lost"].choose(&mut rng).unwrap().to_string();
                    clinic
                        .amend_memory_in_session(
                            s.id,
                            version(s),
                            Amendment::ModifyMemory {
                                memory_id: mid,
                                memory_record_version: mv,
                                changes: MemoryPatch {
                                    preservation_status: Some(status),
                                    ..MemoryPatch::default()
                                },
                            },
                        )
                        .map(drop)
                }
                (Event::End | Event::EndWithFault | Event::EndUnworked, Some(s)) => {
                    let worked = s.worked_memories();
                    let mut outcomes: Vec<MemoryId> = worked.iter().copied().filter(|_| rng.random_bool(0.7)).collect();
                    if matches!(event, Event::EndUnworked) {
                        outcomes.push(MemoryId::new());
                    }
                    let draft = ReportDraft {
                        overall_impression: "ok".to_string(),
                        memory_outcomes: outcomes
                            .into_iter()
                            .map(|memory_id| OutcomeDraft {
                                memory_id,
                                observed_preservation: "preserved".to_string(),
                                emotional_reaction: "positive".to_string(),
                                notes: None,
                            })
                            .collect(),
                        participation_score: rng.random_range(0..=10),
                        repeat_recommended: false,
                        future_proposals: None,
                    };
                    if matches!(event, Event::EndWithFault) {
                        fault = true;
                        store.set_fault_hook(Some(Arc::new(|point| {
                            if point == END_SESSION_FAULT_POINT {
                                Err(Error::Storage("injected crash".into()))
                            } else {
                                Ok(())
                            }
                        })));
                    }
                    let r = clinic.end_session(s.id, version(s), t.id, &draft).map(drop);
                    store.set_fault_hook(None);
                    r
                }
            };
            let after = store.snapshot();
            stats.events += 1;

            // Whether the model says the event must succeed.
            let expect_ok = match (event, &target) {
                (Event::Plan, _) | (_, None) => true,
                (_, Some(_)) if stale => false,
                (Event::Start | Event::Cancel | Event::Reschedule, Some(s)) => s.status == SessionStatus::Planned,
                (Event::AmendAdd | Event::AmendModify, Some(s)) => s.status == SessionStatus::InProgress,
                (Event::End, Some(s)) => s.status == SessionStatus::InProgress,
                (Event::EndWithFault | Event::EndUnworked, Some(_)) => false,
            };
            match &result {
                Ok(()) => stats.accepted += 1,
                Err(_) => stats.rejected += 1,
            }
            if result.is_ok() != expect_ok {
                return Err(format!(
                    "seed {s}: {event:?} on {:?} gave {result:?}",
                    target.map(|t| t.status)
                ));
            }
            if result.is_err() && *before != *after {
                return Err(format!("seed {s}: rejected {event:?} changed the store"));
            }
            if fault {
                stats.faults_injected += 1;
                if let Some(t) = &target {
                    let now = &after.sessions.get(t.id).unwrap();
                    let had_report = before.session_reports.contains(t.id);
                    if now.status != t.status || after.session_reports.contains(t.id) != had_report {
                        return Err(format!("seed {s}: fault left session half-committed"));
                    }
                }
            }
            check_sessions(&before, &after).map_err(|e| format!("seed {s}: {e}"))?;
        }
        stats.sequences += 1;
    }
    Ok(stats)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ArchiveStats {
    pub datasets: usize,
    pub entities: usize,
    pub blobs: usize,
    pub corruptions_rejected: usize,
}

fn entity_count(db: &Database) -> usize {
    db.patients.len()
        + db.related_persons.len()
        + db.memories.len()
        + db.media_assets.len()
        + db.sessions.len()
        + db.session_reports.len()
        + db.assessments.len()
        + db.therapists.len()
}

/// Rewrites a zip, flipping one byte of the first `media/` entry. Returns
/// `None` when the archive has no blobs.
pub fn corrupt_one_blob(archive: &[u8], which: usize) -> Option<Vec<u8>> {
    let mut zin = zip::ZipArchive::new(Cursor::new(archive)).ok()?;
    let blob_names: Vec<String> = (0..zin.len())
        .filter_map(|i| zin.by_index(i).ok().map(|f| f.name().unwrap_or_default().to_string()))
        .filter(|n| n.starts_with("media/"))
        .collect();
    let victim = blob_names.get(which % blob_names.len().max(1))?.clone();
    let mut zout = zip::ZipWriter::new(Cursor::new(Vec::new()));
    for i in 0..zin.len() {
        let mut f = zin.by_index(i).ok()?;
        let name = f.name().ok()?.to_string();
        let mut data = Vec::new();
        f.read_to_end(&mut data).ok()?;
        if name == victim {
            let at = which % data.len();
            data[at] ^= 0x01;
        }
        zout.start_file(name, zip::write::SimpleFileOptions::default()).ok()?;
        zout.write_all(&data).ok()?;
    }
    Some(zout.finish().ok()?.into_inner())
}

/// Gives the store at least one media blob, creating a therapist and
/// patient first if it has none.
fn add_photo(clinic: &Clinic, rng: &mut StdRng) -> recuerdame_core::Result<()> {
    let db = clinic.snapshot();
    let patient = match db.patients.ids().next() {
        Some(p) => p,
        None => {
            let (t, _) = clinic.register_therapist("Spare", "spare@clinic.example")?;
            clinic
                .create_patient(PatientDraft {
                    display_name: "Spare patient".to_string(),
                    assigned_therapists: vec![t.id],
                    ..Default::default()
                })?
                .id
        }
    };
    let m = clinic.create_memory(patient, gen::memory_draft("Spare photo", "adult", gen::year(1970)))?;
    let bytes: Vec<u8> = (0..32).map(|_| rng.random()).collect();
    let meta = MediaMetadata {
        kind: MediaKind::Photo,
        media_type_label: "image/png".to_string(),
        description: None,
        location: None,
        date: None,
        life_stage: None,
    };
    clinic.attach_media(m.id, m.record_version, &bytes, meta)?;
    Ok(())
}

/// `import(export(D)) == D` for `datasets` generated datasets, and a
/// one-byte blob corruption always aborts the import without side effects.
/// Every dataset gets a corruption trial.
pub fn archive_round_trips(seed: u64, datasets: usize) -> Result<ArchiveStats, String> {
    let mut stats = ArchiveStats::default();
    for n in 0..datasets {
        let s = seed.wrapping_add(n as u64);
        let mut rng = StdRng::seed_from_u64(s);
        let (source, _, _dir_a) = crate::fixture::Fixture::empty_clinic();
        gen::populate(&source, &mut rng);
        let original = source.snapshot();
        let bytes = export_archive(source.store(), ExportScope::All, epoch()).map_err(|e| format!("seed {s}: {e}"))?;

        let (target, _, dir_b) = crate::fixture::Fixture::empty_clinic();
        let report = import_archive(target.store(), &bytes, ImportMode::Fresh).map_err(|e| format!("seed {s}: {e}"))?;
        let imported = target.snapshot();
        if imported.without_private() != original.without_private() {
            return Err(format!("seed {s}: round trip changed the entity graph"));
        }
        if !report.skipped.is_empty() {
            return Err(format!("seed {s}: fresh import skipped rows"));
        }
        for a in original.media_assets.values() {
            let want = source.store().blobs().get(&a.content_hash).map_err(|e| e.to_string())?;
            let got = target
                .store()
                .blobs()
                .get(&a.content_hash)
                .map_err(|e| format!("seed {s}: {e}"))?;
            if want != got {
                return Err(format!(
                    "seed {s}: blob {} differs after import",
                    a.content_hash.as_str()
                ));
            }
        }
        stats.datasets += 1;
        stats.entities += entity_count(&original);
        stats.blobs += report.blobs_written;
        drop(dir_b);

        // Datasets without media still round-trip above; the corruption
        // half needs a blob, so one is added before re-exporting.
        let bytes = if original.media_assets.is_empty() {
            add_photo(&source, &mut rng).map_err(|e| format!("seed {s}: {e}"))?;
            export_archive(source.store(), ExportScope::All, epoch()).map_err(|e| format!("seed {s}: {e}"))?
        } else {
            bytes
        };
        if let Some(bad) = corrupt_one_blob(&bytes, rng.random_range(0..1000)) {
            let (victim, _, dir_c) = crate::fixture::Fixture::empty_clinic();
            match import_archive(victim.store(), &bad, ImportMode::Fresh) {
                Err(Error::HashMismatch { .. }) => {}
                other => return Err(format!("seed {s}: corrupted archive gave {other:?}")),
            }
            if !victim.snapshot().is_empty() {
                return Err(format!("seed {s}: corrupted import left entities behind"));
            }
            let leftovers = std::fs::read_dir(dir_c.path().join("media"))
                .map(|d| d.count())
                .unwrap_or(0);
            if leftovers != 0 {
                return Err(format!("seed {s}: corrupted import wrote {leftovers} blobs"));
            }
            stats.corruptions_rejected += 1;
        }
    }
    Ok(stats)
}

/// Entity counts per collection, handy for diffing two stores.
pub fn collection_sizes(db: &Database) -> BTreeMap<&'static str, usize> {
    BTreeMap::from([
        ("patients", db.patients.len()),
        ("related_persons", db.related_persons.len()),
        ("memories", db.memories.len()),
        ("media_assets", db.media_assets.len()),
        ("sessions", db.sessions.len()),
        ("session_reports", db.session_reports.len()),
        ("assessments", db.assessments.len()),
        ("therapists", db.therapists.len()),
    ])
}

pub fn date(y: i64, m: i64) -> DateDraft {
    DateDraft {
        year: y,
        month: Some(m),
        day: None,
    }
}
