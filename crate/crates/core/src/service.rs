//! Use-case operations over the store. Every mutation runs inside one
//! store transaction and takes the caller's expected `record_version`.

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, Duration, FixedOffset, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::{self, MemoryFilter, RelatedPersonSort, SortKey};
use crate::clock::Clock;
use crate::domain::{
    validate_assessment, validate_memory, validate_patient, validate_related_person, validate_therapist,
    AmendmentEntry, AmendmentKind, AssessmentDraft, AssessmentPatch, ClinicalAssessment, EvolutionPoint, MediaAsset,
    MediaMetadata, Memory, MemoryDraft, MemoryPatch, OutboxEntry, OutboxStatus, Patient, PatientDraft, PatientPatch,
    RelatedPerson, RelatedPersonDraft, RelatedPersonPatch, ReportDraft, Session, SessionPatch, SessionPlan,
    SessionReport, SessionStatus, Signature, TherapistAccount,
};
use crate::error::{EntityKind, Error, Result, ValidationCode};
use crate::ids::{AssessmentId, MediaId, MemoryId, OutboxId, PatientId, RelatedPersonId, SessionId, TherapistId};
use crate::life_story::{
    compose_book, compose_storyboard, select_story_entries, BookLayout, BookOptions, LifeStoryQuery, StoryEntry,
    StoryboardManifest, StoryboardOptions,
};
use crate::report::{self, AssessmentInput, MediaResolver, RenderedDocument, SessionReportInput};
use crate::store::{Database, Store};

/// Fault-injection point between the status write and the report write in
/// [`Clinic::end_session`].
pub const END_SESSION_FAULT_POINT: &str = "end_session.after_status";

/// A change made to the catalog while a session is live.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Amendment {
    AddMemory {
        memory: MemoryDraft,
    },
    ModifyMemory {
        memory_id: MemoryId,
        memory_record_version: u64,
        changes: MemoryPatch,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AmendmentOutcome {
    pub memory: Memory,
    pub entry: AmendmentEntry,
    pub session: Session,
}

#[derive(Clone)]
pub struct Clinic {
    store: Arc<Store>,
    clock: Arc<dyn Clock>,
}

fn excerpt(text: &str, max_chars: usize) -> String {
    let text = text.trim();
    match text.char_indices().nth(max_chars) {
        Some((cut, _)) => format!("{}...", text[..cut].trim_end()),
        None => text.to_string(),
    }
}

impl Clinic {
    pub fn new(store: Arc<Store>, clock: Arc<dyn Clock>) -> Self {
        Self { store, clock }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    pub fn snapshot(&self) -> Arc<Database> {
        self.store.snapshot()
    }

    // ---- therapists -------------------------------------------------------

    /// Creates a therapist, or returns the existing account with the same
    /// email (compared case-insensitively). The boolean is true on creation.
    pub fn register_therapist(&self, display_name: &str, email: &str) -> Result<(TherapistAccount, bool)> {
        let account = validate_therapist(TherapistId::new(), display_name, email)?;
        self.store.transact(|db| {
            if let Some(existing) = db
                .therapists
                .values()
                .find(|t| t.email.eq_ignore_ascii_case(&account.email))
            {
                return Ok((existing.clone(), false));
            }
            db.therapists.put(account.clone());
            Ok((account, true))
        })
    }

    /// Replaces the stored credential digest for `therapist`.
    pub fn set_credential(&self, therapist: TherapistId, digest: String) -> Result<()> {
        self.store.transact(|db| {
            db.therapists.require(therapist)?;
            db.credentials.insert(therapist, digest);
            Ok(())
        })
    }

    pub fn credential_digest(&self, therapist: TherapistId) -> Option<String> {
        self.snapshot().credentials.get(&therapist).cloned()
    }

    pub fn therapist(&self, id: TherapistId) -> Result<TherapistAccount> {
        self.snapshot().therapists.require(id).cloned()
    }

    pub fn list_therapists(&self) -> Vec<TherapistAccount> {
        self.snapshot().therapists.values().cloned().collect()
    }

    // ---- patients ---------------------------------------------------------

    pub fn create_patient(&self, draft: PatientDraft) -> Result<Patient> {
        self.store.transact(|db| {
            let patient = validate_patient(PatientId::new(), draft, |t| db.therapists.contains(t))?;
            db.patients.insert_new(patient).cloned()
        })
    }

    pub fn patient(&self, id: PatientId) -> Result<Patient> {
        self.snapshot().patients.require(id).cloned()
    }

    /// Patients the therapist is assigned to, by name then id.
    pub fn patients_of(&self, therapist: TherapistId) -> Vec<Patient> {
        let mut out: Vec<_> = self
            .snapshot()
            .patients
            .values()
            .filter(|p| p.is_assigned(therapist))
            .cloned()
            .collect();
        out.sort_by(|a, b| {
            a.display_name
                .to_lowercase()
                .cmp(&b.display_name.to_lowercase())
                .then(a.id.cmp(&b.id))
        });
        out
    }

    pub fn update_patient(&self, id: PatientId, expected: u64, patch: PatientPatch) -> Result<Patient> {
        self.store.transact(|db| {
            let current = db.patients.checkout(id, expected)?;
            let mut draft = current.to_draft();
            patch.apply(&mut draft);
            let next = validate_patient(id, draft, |t| db.therapists.contains(t))?;
            db.patients.upsert(next, expected).cloned()
        })
    }

    // ---- related persons --------------------------------------------------

    pub fn create_related_person(&self, patient: PatientId, draft: RelatedPersonDraft) -> Result<RelatedPerson> {
        self.store.transact(|db| {
            db.patients.require(patient)?;
            let person = validate_related_person(RelatedPersonId::new(), patient, draft)?;
            db.related_persons.insert_new(person).cloned()
        })
    }

    pub fn related_person(&self, id: RelatedPersonId) -> Result<RelatedPerson> {
        self.snapshot().related_persons.require(id).cloned()
    }

    pub fn update_related_person(
        &self,
        id: RelatedPersonId,
        expected: u64,
        patch: RelatedPersonPatch,
    ) -> Result<RelatedPerson> {
        self.store.transact(|db| {
            let current = db.related_persons.checkout(id, expected)?;
            let mut draft = current.to_draft();
            patch.apply(&mut draft);
            let next = validate_related_person(id, current.patient_id, draft)?;
            db.related_persons.upsert(next, expected).cloned()
        })
    }

    pub fn list_related_persons(&self, patient: PatientId, sort: RelatedPersonSort) -> Result<Vec<RelatedPerson>> {
        let db = self.snapshot();
        db.patients.require(patient)?;
        let persons = db.related_persons.owned_by(patient).cloned().collect();
        Ok(catalog::sort_related_persons(persons, sort))
    }

    // ---- memories ---------------------------------------------------------

    pub fn create_memory(&self, patient: PatientId, draft: MemoryDraft) -> Result<Memory> {
        self.store.transact(|db| {
            db.patients.require(patient)?;
            let memory = validate_memory(MemoryId::new(), patient, &draft, &*db)?;
            db.memories.insert_new(memory).cloned()
        })
    }

    pub fn memory(&self, id: MemoryId) -> Result<Memory> {
        self.snapshot().memories.require(id).cloned()
    }

    pub fn update_memory(&self, id: MemoryId, expected: u64, patch: MemoryPatch) -> Result<Memory> {
        self.store
            .transact(|db| apply_memory_patch(db, id, expected, patch).map(|(_, m)| m))
    }

    /// Hard delete. Fails with an integrity conflict while a session or
    /// report still refers to the memory.
    pub fn delete_memory(&self, id: MemoryId, expected: u64) -> Result<()> {
        self.store.transact(|db| db.memories.delete(id, expected).map(|_| ()))
    }

    pub fn filter_memories(&self, patient: PatientId, filter: &MemoryFilter, sort: SortKey) -> Result<Vec<Memory>> {
        let db = self.snapshot();
        db.patients.require(patient)?;
        let hits = catalog::filter_memories(db.memories.owned_by(patient), filter)?;
        Ok(catalog::sort_memories(hits, sort))
    }

    pub fn search_memories(&self, patient: PatientId, query: &str) -> Result<Vec<Memory>> {
        let db = self.snapshot();
        db.patients.require(patient)?;
        catalog::search_memories(db.memories.owned_by(patient), query)
    }

    // ---- media ------------------------------------------------------------

    /// Writes the blob (deduplicated by content) and records a new asset.
    pub fn store_media(&self, bytes: &[u8], metadata: MediaMetadata) -> Result<MediaAsset> {
        let meta = metadata.check()?;
        let (hash, _) = self.store.blobs().put(bytes)?;
        let asset = MediaAsset {
            id: MediaId::new(),
            kind: meta.kind,
            content_hash: hash,
            media_type_label: meta.media_type_label,
            description: meta.description,
            location: meta.location,
            date: meta.date,
            life_stage: meta.life_stage,
            byte_length: bytes.len() as u64,
        };
        self.store.transact(|db| {
            db.media_assets.put(asset.clone());
            Ok(asset)
        })
    }

    /// Stores the upload and appends it to the memory's media in one step.
    pub fn attach_media(
        &self,
        memory: MemoryId,
        expected: u64,
        bytes: &[u8],
        metadata: MediaMetadata,
    ) -> Result<(Memory, MediaAsset)> {
        self.snapshot().memories.checkout(memory, expected)?;
        let meta = metadata.check()?;
        let (hash, _) = self.store.blobs().put(bytes)?;
        self.store.transact(|db| {
            let mut m = db.memories.checkout(memory, expected)?;
            let asset = MediaAsset {
                id: MediaId::new(),
                kind: meta.kind,
                content_hash: hash,
                media_type_label: meta.media_type_label,
                description: meta.description,
                location: meta.location,
                date: meta.date,
                life_stage: meta.life_stage,
                byte_length: bytes.len() as u64,
            };
            db.media_assets.put(asset.clone());
            m.media.push(asset.id);
            let m = db.memories.upsert(m, expected)?.clone();
            Ok((m, asset))
        })
    }

    pub fn media(&self, id: MediaId) -> Result<MediaAsset> {
        self.snapshot().media_assets.require(id).cloned()
    }

    pub fn media_bytes(&self, id: MediaId) -> Result<(MediaAsset, Vec<u8>)> {
        let asset = self.media(id)?;
        let bytes = self.store.blobs().get(&asset.content_hash)?;
        Ok((asset, bytes))
    }

    // ---- sessions ---------------------------------------------------------

    pub fn plan_session(&self, patient: PatientId, plan: SessionPlan) -> Result<Session> {
        self.store.transact(|db| {
            db.patients.require(patient)?;
            let session = plan.into_session(SessionId::new(), patient)?;
            check_plan_references(db, &session)?;
            db.sessions.insert_new(session).cloned()
        })
    }

    pub fn session(&self, id: SessionId) -> Result<Session> {
        self.snapshot().sessions.require(id).cloned()
    }

    /// Sessions of a patient by scheduled time, then id.
    pub fn list_sessions(&self, patient: PatientId) -> Result<Vec<Session>> {
        let db = self.snapshot();
        db.patients.require(patient)?;
        let mut out: Vec<_> = db.sessions.owned_by(patient).cloned().collect();
        out.sort_by(|a, b| a.scheduled_at.cmp(&b.scheduled_at).then(a.id.cmp(&b.id)));
        Ok(out)
    }

    /// Edits the plan of a session that has not started yet.
    pub fn update_session(&self, id: SessionId, expected: u64, patch: SessionPatch) -> Result<Session> {
        self.store.transact(|db| {
            let current = db.sessions.checkout(id, expected)?;
            if current.status != SessionStatus::Planned {
                return Err(Error::IllegalTransition {
                    from: current.status,
                    to: SessionStatus::Planned,
                });
            }
            let mut plan = current.to_plan();
            patch.apply(&mut plan);
            let next = plan.into_session(id, current.patient_id)?;
            check_plan_references(db, &next)?;
            db.sessions.upsert(next, expected).cloned()
        })
    }

    pub fn start_session(&self, id: SessionId, expected: u64) -> Result<Session> {
        self.transition(id, expected, SessionStatus::InProgress)
    }

    pub fn cancel_session(&self, id: SessionId, expected: u64) -> Result<Session> {
        self.transition(id, expected, SessionStatus::Cancelled)
    }

    fn transition(&self, id: SessionId, expected: u64, to: SessionStatus) -> Result<Session> {
        self.store.transact(|db| {
            let mut s = db.sessions.checkout(id, expected)?;
            s.transition(to)?;
            db.sessions.upsert(s, expected).cloned()
        })
    }

    /// Moves a planned session. The version is bumped even when the time is
    /// unchanged.
    pub fn reschedule_session(
        &self,
        id: SessionId,
        expected: u64,
        scheduled_at: DateTime<FixedOffset>,
    ) -> Result<Session> {
        self.store.transact(|db| {
            let mut s = db.sessions.checkout(id, expected)?;
            if s.status != SessionStatus::Planned {
                return Err(Error::IllegalTransition {
                    from: s.status,
                    to: SessionStatus::Planned,
                });
            }
            s.scheduled_at = scheduled_at;
            db.sessions.upsert(s, expected).cloned()
        })
    }

    /// Adds or modifies a memory during a live session and logs the change.
    /// `expected` guards the session; a modification also carries the
    /// memory's own expected version.
    pub fn amend_memory_in_session(
        &self,
        session_id: SessionId,
        expected: u64,
        amendment: Amendment,
    ) -> Result<AmendmentOutcome> {
        let now = self.now();
        self.store.transact(|db| {
            let mut session = db.sessions.checkout(session_id, expected)?;
            if session.status != SessionStatus::InProgress {
                return Err(Error::SessionNotLive);
            }
            let (memory, kind, summary, changes) = match amendment {
                Amendment::AddMemory { memory } => {
                    let m = validate_memory(MemoryId::new(), session.patient_id, &memory, &*db)?;
                    let m = db.memories.insert_new(m)?.clone();
                    let summary = format!("added memory: {}", excerpt(&m.description, 60));
                    (m, AmendmentKind::Added, summary, Vec::new())
                }
                Amendment::ModifyMemory {
                    memory_id,
                    memory_record_version,
                    changes,
                } => {
                    let owner = db.memories.require(memory_id)?.patient_id;
                    if owner != session.patient_id {
                        return Err(Error::ForeignMemory(memory_id.to_string()));
                    }
                    let (before, after) = apply_memory_patch(db, memory_id, memory_record_version, changes)?;
                    let diff = before.diff(&after);
                    let summary = if diff.is_empty() {
                        "no field changed".to_string()
                    } else {
                        diff.iter()
                            .map(|c| {
                                format!(
                                    "{}: {} -> {}",
                                    c.field,
                                    c.from.as_deref().unwrap_or("(none)"),
                                    c.to.as_deref().unwrap_or("(none)")
                                )
                            })
                            .collect::<Vec<_>>()
                            .join("; ")
                    };
                    (after, AmendmentKind::Modified, summary, diff)
                }
            };
            session.log_amendment(AmendmentEntry {
                at: now,
                memory_id: memory.id,
                kind,
                summary,
                changes,
            });
            let entry = session.amendment_log.last().cloned().expect("just logged");
            let session = db.sessions.upsert(session, expected)?.clone();
            Ok(AmendmentOutcome { memory, entry, session })
        })
    }

    /// Completes a live session and stores its report, all or nothing.
    pub fn end_session(
        &self,
        id: SessionId,
        expected: u64,
        author: TherapistId,
        draft: &ReportDraft,
    ) -> Result<(Session, SessionReport)> {
        let now = self.now();
        self.store.transact(|db| {
            let mut session = db.sessions.checkout(id, expected)?;
            if session.status != SessionStatus::InProgress {
                return Err(Error::SessionNotLive);
            }
            db.therapists.require(author)?;
            let report = draft.validate(&session, author, now)?;
            session.transition(SessionStatus::Completed)?;
            let session = db.sessions.upsert(session, expected)?.clone();
            self.store.fault_point(END_SESSION_FAULT_POINT)?;
            db.session_reports.put(report.clone());
            Ok((session, report))
        })
    }

    pub fn session_report(&self, session: SessionId) -> Result<SessionReport> {
        let db = self.snapshot();
        db.sessions.require(session)?;
        db.session_reports
            .get(session)
            .cloned()
            .ok_or_else(|| Error::ReportMissing(session.to_string()))
    }

    // ---- assessments ------------------------------------------------------

    pub fn record_assessment(
        &self,
        patient: PatientId,
        signer: TherapistId,
        draft: &AssessmentDraft,
    ) -> Result<ClinicalAssessment> {
        let now = self.now();
        self.store.transact(|db| {
            let p = db.patients.require(patient)?;
            if !p.is_assigned(signer) {
                return Err(Error::UnassignedTherapist(signer.to_string()));
            }
            let signature = Signature {
                therapist_id: signer,
                signed_at: now,
            };
            let a = validate_assessment(AssessmentId::new(), patient, draft, signature)?;
            db.assessments.insert_new(a).cloned()
        })
    }

    /// Applies `patch` and re-signs the assessment as `signer`.
    pub fn update_assessment(
        &self,
        id: AssessmentId,
        expected: u64,
        signer: TherapistId,
        patch: AssessmentPatch,
    ) -> Result<ClinicalAssessment> {
        let now = self.now();
        self.store.transact(|db| {
            let current = db.assessments.checkout(id, expected)?;
            if !db.patients.require(current.patient_id)?.is_assigned(signer) {
                return Err(Error::UnassignedTherapist(signer.to_string()));
            }
            let mut draft = current.to_draft();
            patch.apply(&mut draft);
            let signature = Signature {
                therapist_id: signer,
                signed_at: now,
            };
            let next = validate_assessment(id, current.patient_id, &draft, signature)?;
            db.assessments.upsert(next, expected).cloned()
        })
    }

    pub fn assessment(&self, id: AssessmentId) -> Result<ClinicalAssessment> {
        self.snapshot().assessments.require(id).cloned()
    }

    /// Assessments by date, then id.
    pub fn list_assessments(&self, patient: PatientId) -> Result<Vec<ClinicalAssessment>> {
        let db = self.snapshot();
        db.patients.require(patient)?;
        let mut out: Vec<_> = db.assessments.owned_by(patient).cloned().collect();
        out.sort_by(|a, b| a.assessed_at.cmp(&b.assessed_at).then(a.id.cmp(&b.id)));
        Ok(out)
    }

    pub fn evolution_series(&self, patient: PatientId, instrument: &str) -> Result<Vec<EvolutionPoint>> {
        Ok(self
            .list_assessments(patient)?
            .iter()
            .filter_map(|a| {
                a.instrument(instrument).map(|r| EvolutionPoint {
                    assessment_id: a.id,
                    assessed_at: a.assessed_at,
                    score: r.score,
                    range_min: r.range_min,
                    range_max: r.range_max,
                })
            })
            .collect())
    }

    /// Series for every instrument the assessment reports, keyed by the
    /// instrument's display name in that assessment.
    pub fn evolution_for(&self, assessment: &ClinicalAssessment) -> Result<BTreeMap<String, Vec<EvolutionPoint>>> {
        assessment
            .instrument_results
            .iter()
            .map(|r| {
                self.evolution_series(assessment.patient_id, &r.instrument_name)
                    .map(|s| (r.instrument_name.clone(), s))
            })
            .collect()
    }

    // ---- life story -------------------------------------------------------

    pub fn story_entries(&self, patient: PatientId, query: &LifeStoryQuery) -> Result<Vec<StoryEntry>> {
        let db = self.snapshot();
        db.patients.require(patient)?;
        select_story_entries(
            db.memories.owned_by(patient),
            db.related_persons.as_map(),
            db.media_assets.as_map(),
            query,
        )
    }

    pub fn life_story_book(&self, patient: PatientId, query: &LifeStoryQuery) -> Result<BookLayout> {
        let p = self.patient(patient)?;
        let entries = self.story_entries(patient, query)?;
        let options = BookOptions {
            query_summary: query.summary(),
            ..BookOptions::default()
        };
        Ok(compose_book(&p, &entries, &options, self.now()))
    }

    pub fn storyboard(
        &self,
        patient: PatientId,
        query: &LifeStoryQuery,
        options: &StoryboardOptions,
    ) -> Result<StoryboardManifest> {
        let p = self.patient(patient)?;
        let entries = self.story_entries(patient, query)?;
        Ok(compose_storyboard(
            &p,
            &entries,
            self.snapshot().media_assets.as_map(),
            options,
        ))
    }

    // ---- documents --------------------------------------------------------

    pub fn render_session_report(&self, session: SessionId) -> Result<RenderedDocument> {
        let db = self.snapshot();
        let s = db.sessions.require(session)?;
        let report = db
            .session_reports
            .get(session)
            .ok_or_else(|| Error::ReportMissing(session.to_string()))?;
        let patient = db.patients.require(s.patient_id)?;
        let therapist = db.therapists.require(report.author_id)?;
        let memory_captions: BTreeMap<MemoryId, String> = report
            .memory_outcomes
            .iter()
            .filter_map(|o| db.memories.get(o.memory_id).map(|m| (m.id, m.description.clone())))
            .collect();
        report::render_session_report(&SessionReportInput {
            patient,
            session: s,
            report: Some(report),
            memory_captions: &memory_captions,
            therapist,
        })
    }

    pub fn render_assessment(&self, id: AssessmentId) -> Result<RenderedDocument> {
        let a = self.assessment(id)?;
        let db = self.snapshot();
        let patient = db.patients.require(a.patient_id)?;
        let signer = db.therapists.require(a.signature.therapist_id)?;
        let series = self.evolution_for(&a)?;
        Ok(report::render_assessment_report(&AssessmentInput {
            patient,
            assessment: &a,
            signer,
            series: &series,
        }))
    }

    pub fn render_life_story_book(&self, patient: PatientId, query: &LifeStoryQuery) -> Result<RenderedDocument> {
        let book = self.life_story_book(patient, query)?;
        report::render_life_story_book(&book, self)
    }

    // ---- outbox -----------------------------------------------------------

    pub fn enqueue_email(&self, person: RelatedPersonId, subject: &str, body: &str) -> Result<OutboxEntry> {
        let now = self.now();
        self.store.transact(|db| {
            let rp = db.related_persons.require(person)?;
            let to_email = rp
                .contact_email
                .clone()
                .ok_or_else(|| Error::NoContactEmail(person.to_string()))?;
            let subject = subject.trim();
            if subject.is_empty() {
                return Err(Error::invalid("subject", ValidationCode::EmptyField));
            }
            let entry = OutboxEntry {
                id: OutboxId::new(),
                to_email,
                subject: subject.to_string(),
                body: body.to_string(),
                related_person_id: person,
                created_at: now,
                status: OutboxStatus::Queued,
                attempts: 0,
                next_attempt_at: now,
                last_error: None,
                sent_at: None,
            };
            db.outbox.put(entry.clone());
            Ok(entry)
        })
    }

    pub fn outbox_entry(&self, id: OutboxId) -> Result<OutboxEntry> {
        self.snapshot().outbox.require(id).cloned()
    }

    pub fn outbox(&self) -> Vec<OutboxEntry> {
        self.snapshot().outbox.values().cloned().collect()
    }

    /// Queued entries whose next attempt is due, oldest first.
    pub fn due_outbox(&self, now: DateTime<Utc>) -> Vec<OutboxEntry> {
        let mut due: Vec<_> = self
            .snapshot()
            .outbox
            .values()
            .filter(|e| e.status == OutboxStatus::Queued && e.next_attempt_at <= now)
            .cloned()
            .collect();
        due.sort_by(|a, b| a.created_at.cmp(&b.created_at).then(a.id.cmp(&b.id)));
        due
    }

    /// Records one delivery attempt. On failure the entry becomes `Failed`
    /// and may be requeued once `retry_at` has passed.
    pub fn record_delivery(
        &self,
        id: OutboxId,
        outcome: std::result::Result<(), String>,
        now: DateTime<Utc>,
        retry_at: DateTime<Utc>,
    ) -> Result<OutboxEntry> {
        self.store.transact(|db| {
            let e = db.outbox.get_mut(id)?;
            let to = if outcome.is_ok() {
                OutboxStatus::Sent
            } else {
                OutboxStatus::Failed
            };
            if !e.status.can_transition_to(to) {
                return Err(Error::Integrity(format!("outbox entry {id} is {:?}", e.status)));
            }
            e.status = to;
            e.attempts += 1;
            match outcome {
                Ok(()) => {
                    e.sent_at = Some(now);
                    e.last_error = None;
                }
                Err(msg) => {
                    e.last_error = Some(msg);
                    e.next_attempt_at = retry_at;
                }
            }
            Ok(e.clone())
        })
    }

    /// Moves failed entries whose backoff has elapsed back to `Queued`,
    /// unless they have used up `max_attempts`. Returns how many moved.
    pub fn requeue_failed(&self, now: DateTime<Utc>, max_attempts: u32) -> Result<usize> {
        self.store.transact(|db| {
            let ids: Vec<_> = db
                .outbox
                .values()
                .filter(|e| e.status == OutboxStatus::Failed && e.attempts < max_attempts && e.next_attempt_at <= now)
                .map(|e| e.id)
                .collect();
            for id in &ids {
                db.outbox.get_mut(*id)?.status = OutboxStatus::Queued;
            }
            Ok(ids.len())
        })
    }
}

impl MediaResolver for Clinic {
    fn resolve(&self, id: MediaId) -> Result<(MediaAsset, Vec<u8>)> {
        self.media_bytes(id).map_err(|e| match e {
            Error::NotFound(..) => Error::MediaUnresolved(id.to_string()),
            other => other,
        })
    }
}

/// Exponential backoff for outbox retries, capped at one hour.
pub fn retry_backoff(attempts: u32) -> Duration {
    let secs = 2i64.saturating_pow(attempts.min(12)).min(3600);
    Duration::seconds(secs)
}

fn apply_memory_patch(db: &mut Database, id: MemoryId, expected: u64, patch: MemoryPatch) -> Result<(Memory, Memory)> {
    let current = db.memories.checkout(id, expected)?;
    let mut draft = current.to_draft();
    patch.apply(&mut draft);
    let next = validate_memory(id, current.patient_id, &draft, &*db)?;
    let stored = db.memories.upsert(next, expected)?.clone();
    Ok((current, stored))
}

fn check_plan_references(db: &Database, session: &Session) -> Result<()> {
    for mid in &session.planned_memory_ids {
        let m = db.memories.require(*mid)?;
        if m.patient_id != session.patient_id {
            return Err(Error::ForeignMemory(mid.to_string()));
        }
    }
    let catalog = db.patient_media(session.patient_id);
    for media in &session.planned_media_ids {
        if !db.media_assets.contains(*media) {
            return Err(Error::not_found(EntityKind::Media, media));
        }
        if !catalog.contains(media) {
            return Err(Error::ForeignMedia(media.to_string()));
        }
    }
    Ok(())
}
