//! Portable zip archives of the catalog.
//!
//! Layout:
//!
//! ```text
//! manifest.json     {schema_version, exported_at, scope, collections}
//! media/<sha256>    one file per distinct blob
//! ```
//!
//! Credentials and the outbox never leave the store.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Cursor, Read, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipArchive, ZipWriter};

use super::{migrate, Database, Keyed, Store, Table};
use crate::domain::ContentHash;
use crate::error::{Error, Result};
use crate::ids::{PatientId, TherapistId};

const MANIFEST: &str = "manifest.json";
const MEDIA_PREFIX: &str = "media/";
const MAX_ENTRY_BYTES: u64 = 1 << 30;
const PRIVATE_COLLECTIONS: [&str; 2] = ["credentials", "outbox"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportScope {
    All,
    Patient(PatientId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportMode {
    /// Target store must be empty.
    Fresh,
    /// Rows whose id already exists are skipped and reported.
    Merge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedRow {
    pub collection: &'static str,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImportReport {
    pub mode: ImportMode,
    pub schema_version: u32,
    pub migrations_applied: Vec<&'static str>,
    pub imported: BTreeMap<&'static str, usize>,
    pub skipped: Vec<SkippedRow>,
    pub blobs_written: usize,
}

/// The subset of `db` that a scoped export carries.
pub fn scoped(db: &Database, scope: ExportScope) -> Result<Database> {
    let patient = match scope {
        ExportScope::All => return Ok(db.without_private()),
        ExportScope::Patient(p) => db.patients.require(p)?.clone(),
    };
    let pid = patient.id;
    let sessions: Table<_> = db.sessions.owned_by(pid).cloned().collect();
    let session_reports: Table<_> = db
        .session_reports
        .values()
        .filter(|r| sessions.contains(r.session_id))
        .cloned()
        .collect();
    let assessments: Table<_> = db.assessments.owned_by(pid).cloned().collect();

    let mut media_ids = db.patient_media(pid);
    media_ids.extend(sessions.values().flat_map(|s| s.planned_media_ids.iter().copied()));

    let mut therapist_ids: BTreeSet<TherapistId> = patient.assigned_therapists.clone();
    therapist_ids.extend(session_reports.values().map(|r| r.author_id));
    therapist_ids.extend(assessments.values().map(|a| a.signature.therapist_id));

    Ok(Database {
        related_persons: db.related_persons.owned_by(pid).cloned().collect(),
        memories: db.memories.owned_by(pid).cloned().collect(),
        media_assets: media_ids
            .into_iter()
            .filter_map(|id| db.media_assets.get(id).cloned())
            .collect(),
        sessions,
        session_reports,
        assessments,
        therapists: therapist_ids
            .into_iter()
            .filter_map(|id| db.therapists.get(id).cloned())
            .collect(),
        patients: [patient].into_iter().collect(),
        credentials: BTreeMap::new(),
        outbox: Table::default(),
    })
}

/// Writes the committed state (or one patient's slice of it) as a zip.
pub fn export_archive(store: &Store, scope: ExportScope, exported_at: DateTime<Utc>) -> Result<Vec<u8>> {
    let db = scoped(&store.snapshot(), scope)?;
    let mut collections = match serde_json::to_value(&db)? {
        Value::Object(c) => c,
        _ => unreachable!("database serializes as an object"),
    };
    for key in PRIVATE_COLLECTIONS {
        collections.remove(key);
    }
    let manifest = serde_json::json!({
        "schema_version": migrate::CURRENT_SCHEMA,
        "exported_at": exported_at,
        "scope": scope,
        "collections": collections,
    });

    let hashes: BTreeSet<&ContentHash> = db.media_assets.values().map(|a| &a.content_hash).collect();
    let zip_err = |e: zip::result::ZipError| Error::Storage(format!("zip: {e}"));
    let base = SimpleFileOptions::default().last_modified_time(zip::DateTime::default());
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    zip.start_file(MANIFEST, base.compression_method(CompressionMethod::Deflated))
        .map_err(zip_err)?;
    zip.write_all(&serde_json::to_vec_pretty(&manifest)?)?;
    for hash in hashes {
        let bytes = store.blobs().get(hash)?;
        zip.start_file(
            format!("{MEDIA_PREFIX}{hash}"),
            base.compression_method(CompressionMethod::Stored),
        )
        .map_err(zip_err)?;
        zip.write_all(&bytes)?;
    }
    Ok(zip.finish().map_err(zip_err)?.into_inner())
}

struct ParsedArchive {
    schema_version: u32,
    migrations_applied: Vec<&'static str>,
    db: Database,
    blobs: BTreeMap<ContentHash, Vec<u8>>,
}

fn read_entry(entry: &mut impl Read, name: &str) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    entry.take(MAX_ENTRY_BYTES + 1).read_to_end(&mut buf)?;
    if buf.len() as u64 > MAX_ENTRY_BYTES {
        return Err(Error::Archive(format!("{name} exceeds size limit")));
    }
    Ok(buf)
}

fn parse(bytes: &[u8]) -> Result<ParsedArchive> {
    let bad = |e: zip::result::ZipError| Error::Archive(e.to_string());
    let mut zip = ZipArchive::new(Cursor::new(bytes)).map_err(bad)?;

    let manifest_bytes = {
        let mut entry = zip
            .by_name(MANIFEST)
            .map_err(|_| Error::Archive("manifest.json missing".into()))?;
        read_entry(&mut entry, MANIFEST)?
    };
    let manifest: Value =
        serde_json::from_slice(&manifest_bytes).map_err(|e| Error::Archive(format!("manifest: {e}")))?;
    let schema_version =
        migrate::schema_version_of(&manifest).map_err(|_| Error::Archive("manifest has no schema_version".into()))?;
    let mut collections: Map<String, Value> = match manifest.get("collections") {
        Some(Value::Object(c)) => c.clone(),
        _ => return Err(Error::Archive("manifest has no collections".into())),
    };
    let migrations_applied = migrate::migrate_collections(schema_version, &mut collections)?;
    for key in PRIVATE_COLLECTIONS {
        collections.remove(key);
    }
    let db: Database =
        serde_json::from_value(Value::Object(collections)).map_err(|e| Error::Archive(format!("collections: {e}")))?;

    let mut blobs = BTreeMap::new();
    for i in 0..zip.len() {
        let mut entry = zip.by_index(i).map_err(bad)?;
        let name = entry.name().map_err(bad)?.into_owned();
        let Some(stem) = name.strip_prefix(MEDIA_PREFIX) else {
            continue;
        };
        if entry.is_dir() {
            continue;
        }
        let expected =
            ContentHash::parse(stem).ok_or_else(|| Error::Archive(format!("{name} is not named by its hash")))?;
        let content = read_entry(&mut entry, &name)?;
        let actual = ContentHash::of(&content);
        if actual != expected {
            return Err(Error::HashMismatch {
                name,
                actual: actual.to_string(),
            });
        }
        blobs.insert(expected, content);
    }
    Ok(ParsedArchive {
        schema_version,
        migrations_applied,
        db,
        blobs,
    })
}

fn merge_table<T: Keyed>(
    into: &mut Table<T>,
    from: Table<T>,
    collection: &'static str,
    skipped: &mut Vec<SkippedRow>,
) -> usize {
    let mut added = 0;
    for row in from.values() {
        if into.contains(row.key()) {
            skipped.push(SkippedRow {
                collection,
                id: row.key().to_string(),
            });
        } else {
            into.put(row.clone());
            added += 1;
        }
    }
    added
}

/// Loads an archive into `store`. Every blob is verified against its name
/// before anything is committed; a single bad blob aborts the import.
pub fn import_archive(store: &Store, bytes: &[u8], mode: ImportMode) -> Result<ImportReport> {
    let parsed = parse(bytes)?;
    let ParsedArchive {
        schema_version,
        migrations_applied,
        db: incoming,
        blobs,
    } = parsed;

    for asset in incoming.media_assets.values() {
        if !blobs.contains_key(&asset.content_hash) && !store.blobs().contains(&asset.content_hash) {
            return Err(Error::Archive(format!(
                "media asset {} has no blob {}",
                asset.id, asset.content_hash
            )));
        }
    }

    store.transact(|db| {
        if mode == ImportMode::Fresh && !db.is_empty() {
            return Err(Error::NotEmpty);
        }
        let mut skipped = Vec::new();
        let mut imported = BTreeMap::new();
        let Database {
            patients,
            related_persons,
            memories,
            media_assets,
            sessions,
            session_reports,
            assessments,
            therapists,
            ..
        } = incoming;
        let s = &mut skipped;
        imported.insert(
            "therapists",
            merge_table(&mut db.therapists, therapists, "therapists", s),
        );
        imported.insert("patients", merge_table(&mut db.patients, patients, "patients", s));
        imported.insert(
            "related_persons",
            merge_table(&mut db.related_persons, related_persons, "related_persons", s),
        );
        imported.insert(
            "media_assets",
            merge_table(&mut db.media_assets, media_assets, "media_assets", s),
        );
        imported.insert("memories", merge_table(&mut db.memories, memories, "memories", s));
        imported.insert("sessions", merge_table(&mut db.sessions, sessions, "sessions", s));
        imported.insert(
            "session_reports",
            merge_table(&mut db.session_reports, session_reports, "session_reports", s),
        );
        imported.insert(
            "assessments",
            merge_table(&mut db.assessments, assessments, "assessments", s),
        );

        // Blobs go to disk only once the merged rows are known to be
        // consistent. Blob files are content-addressed, so a later commit
        // failure leaves at worst an unreferenced file behind.
        db.check_integrity()?;
        let mut blobs_written = 0;
        for content in blobs.values() {
            if store.blobs().put(content)?.1 {
                blobs_written += 1;
            }
        }
        Ok(ImportReport {
            mode,
            schema_version,
            migrations_applied,
            imported,
            skipped,
            blobs_written,
        })
    })
}
