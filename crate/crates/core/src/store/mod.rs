//! Durable storage: an in-memory database committed as a whole-snapshot
//! JSON file, plus the content-addressed media blob store.
//!
//! Readers take an `Arc` snapshot and never block writers. Writers are
//! serialized; each transaction runs against a private copy that replaces
//! the committed snapshot only after the closure succeeds, integrity checks
//! pass and the file has been durably renamed into place.

pub mod archive;
mod blob;
mod integrity;
pub mod migrate;
mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

pub use blob::{BlobStore, BlobVerifyReport};
pub use table::{Keyed, Owned, Table, Versioned};

use crate::domain::{
    ClinicalAssessment, MediaAsset, Memory, OutboxEntry, Patient, ReferenceLookup, RelatedPerson, Session,
    SessionReport, TherapistAccount,
};
use crate::error::{Error, Result};
use crate::ids::{MediaId, PatientId, RelatedPersonId, TherapistId};

pub const SNAPSHOT_FILE: &str = "store.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Database {
    #[serde(default)]
    pub patients: Table<Patient>,
    #[serde(default)]
    pub related_persons: Table<RelatedPerson>,
    #[serde(default)]
    pub memories: Table<Memory>,
    #[serde(default)]
    pub media_assets: Table<MediaAsset>,
    #[serde(default)]
    pub sessions: Table<Session>,
    #[serde(default)]
    pub session_reports: Table<SessionReport>,
    #[serde(default)]
    pub assessments: Table<ClinicalAssessment>,
    #[serde(default)]
    pub therapists: Table<TherapistAccount>,
    /// Hex SHA-256 of each therapist's current bearer token.
    #[serde(default)]
    pub credentials: BTreeMap<TherapistId, String>,
    #[serde(default)]
    pub outbox: Table<OutboxEntry>,
}

impl Database {
    /// True when no entity of any kind is stored.
    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
            && self.related_persons.is_empty()
            && self.memories.is_empty()
            && self.media_assets.is_empty()
            && self.sessions.is_empty()
            && self.session_reports.is_empty()
            && self.assessments.is_empty()
            && self.therapists.is_empty()
            && self.outbox.is_empty()
    }

    /// Copy without credentials and outbox, i.e. what an archive carries.
    pub fn without_private(&self) -> Database {
        Database {
            credentials: BTreeMap::new(),
            outbox: Table::default(),
            ..self.clone()
        }
    }

    /// Media reachable from a patient's memories.
    pub fn patient_media(&self, patient: PatientId) -> BTreeSet<MediaId> {
        self.memories
            .owned_by(patient)
            .flat_map(|m| m.media.iter().copied())
            .collect()
    }

    pub fn check_integrity(&self) -> Result<()> {
        integrity::check(self)
    }
}

impl ReferenceLookup for Database {
    fn related_person_owner(&self, id: RelatedPersonId) -> Option<PatientId> {
        self.related_persons.get(id).map(|p| p.patient_id)
    }

    fn media_users(&self, id: MediaId) -> Option<BTreeSet<PatientId>> {
        if !self.media_assets.contains(id) {
            return None;
        }
        let from_memories = self
            .memories
            .values()
            .filter(|m| m.media.contains(&id))
            .map(|m| m.patient_id);
        let from_sessions = self
            .sessions
            .values()
            .filter(|s| s.planned_media_ids.contains(&id))
            .map(|s| s.patient_id);
        Some(from_memories.chain(from_sessions).collect())
    }
}

/// On-disk form of the snapshot file.
#[derive(Serialize)]
struct SnapshotOut<'a> {
    schema_version: u32,
    collections: &'a Database,
}

type FaultHook = Arc<dyn Fn(&'static str) -> Result<()> + Send + Sync>;

pub struct Store {
    committed: RwLock<Arc<Database>>,
    writer: Mutex<()>,
    snapshot_path: Option<PathBuf>,
    blobs: BlobStore,
    fault_hook: RwLock<Option<FaultHook>>,
}

impl Store {
    /// Opens (or initializes) a store persisted under `data_dir`, with media
    /// blobs under `media_dir`. Refuses snapshots written by an older schema;
    /// those need [`migrate::migrate_data_dir`] first.
    pub fn open(data_dir: &Path, media_dir: &Path) -> Result<Self> {
        fs::create_dir_all(data_dir)?;
        let path = data_dir.join(SNAPSHOT_FILE);
        let db = if path.exists() {
            let raw: serde_json::Value = serde_json::from_slice(&fs::read(&path)?)?;
            let found = migrate::schema_version_of(&raw)?;
            if found < migrate::CURRENT_SCHEMA {
                return Err(Error::SchemaOutdated {
                    found,
                    current: migrate::CURRENT_SCHEMA,
                });
            }
            if found > migrate::CURRENT_SCHEMA {
                return Err(Error::SchemaTooNew {
                    found,
                    supported: migrate::CURRENT_SCHEMA,
                });
            }
            let collections = raw
                .get("collections")
                .cloned()
                .ok_or_else(|| Error::Storage("snapshot has no collections".into()))?;
            serde_json::from_value(collections)?
        } else {
            Database::default()
        };
        db.check_integrity()?;
        Ok(Self::with_database(db, Some(path), BlobStore::open(media_dir)?))
    }

    /// A store that keeps entities in memory only. Blobs still go to disk.
    pub fn in_memory(media_dir: &Path) -> Result<Self> {
        Ok(Self::with_database(
            Database::default(),
            None,
            BlobStore::open(media_dir)?,
        ))
    }

    fn with_database(db: Database, snapshot_path: Option<PathBuf>, blobs: BlobStore) -> Self {
        Self {
            committed: RwLock::new(Arc::new(db)),
            writer: Mutex::new(()),
            snapshot_path,
            blobs,
            fault_hook: RwLock::new(None),
        }
    }

    pub fn snapshot(&self) -> Arc<Database> {
        self.committed.read().clone()
    }

    pub fn blobs(&self) -> &BlobStore {
        &self.blobs
    }

    /// Runs `f` against a private copy of the database and commits it if `f`
    /// returns `Ok` and the result passes the integrity checks. A failure or
    /// panic anywhere leaves the committed snapshot untouched.
    pub fn transact<T>(&self, f: impl FnOnce(&mut Database) -> Result<T>) -> Result<T> {
        let _guard = self.writer.lock();
        let mut working = Database::clone(&self.committed.read());
        let out = f(&mut working)?;
        working.check_integrity()?;
        if let Some(path) = &self.snapshot_path {
            persist(path, &working)?;
        }
        *self.committed.write() = Arc::new(working);
        Ok(out)
    }

    /// Installs a hook called at named points inside multi-step
    /// transactions. Returning an error aborts the transaction there.
    pub fn set_fault_hook(&self, hook: Option<FaultHook>) {
        *self.fault_hook.write() = hook;
    }

    pub(crate) fn fault_point(&self, name: &'static str) -> Result<()> {
        let hook = self.fault_hook.read().clone();
        match hook {
            Some(h) => h(name),
            None => Ok(()),
        }
    }
}

pub(crate) fn persist(path: &Path, db: &Database) -> Result<()> {
    let bytes = serde_json::to_vec(&SnapshotOut {
        schema_version: migrate::CURRENT_SCHEMA,
        collections: db,
    })?;
    write_atomic(path, &bytes)
}

/// Writes to a temp file in the target directory, syncs, then renames over
/// the target.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .ok_or_else(|| Error::Storage(format!("{} has no parent", path.display())))?;
    let mut tmp = tempfile::Builder::new().prefix(".tmp-").tempfile_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
