//! Schema upgrades for snapshot files and archives.
//!
//! Each step rewrites the raw JSON collections map from one schema version
//! to the next. Snapshots and archive manifests share the same table, so an
//! archive written by an older release imports through the same code path
//! that `migrate` uses on a data directory.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use super::{write_atomic, Database, SNAPSHOT_FILE};
use crate::error::{Error, Result};

pub const CURRENT_SCHEMA: u32 = 2;

type Collections = Map<String, Value>;

struct Step {
    from: u32,
    summary: &'static str,
    apply: fn(&mut Collections) -> Result<()>,
}

const STEPS: &[Step] = &[Step {
    from: 1,
    summary: "rename follow_up_reports to session_reports; rename memory field type to life_stage",
    apply: v1_to_v2,
}];

fn v1_to_v2(c: &mut Collections) -> Result<()> {
    if let Some(reports) = c.remove("follow_up_reports") {
        if c.contains_key("session_reports") {
            return Err(Error::Storage(
                "both follow_up_reports and session_reports present".into(),
            ));
        }
        c.insert("session_reports".into(), reports);
    }
    if let Some(Value::Array(memories)) = c.get_mut("memories") {
        for m in memories.iter_mut().filter_map(Value::as_object_mut) {
            if let Some(stage) = m.remove("type") {
                m.entry("life_stage").or_insert(stage);
            }
        }
    }
    Ok(())
}

/// Reads the top-level `schema_version` of a snapshot or manifest.
pub fn schema_version_of(doc: &Value) -> Result<u32> {
    doc.get("schema_version")
        .and_then(Value::as_u64)
        .and_then(|v| u32::try_from(v).ok())
        .filter(|v| *v >= 1)
        .ok_or_else(|| Error::Storage("missing or invalid schema_version".into()))
}

/// Upgrades `collections` from `found` to [`CURRENT_SCHEMA`] in place and
/// returns the summaries of the steps applied.
pub fn migrate_collections(found: u32, collections: &mut Collections) -> Result<Vec<&'static str>> {
    if found > CURRENT_SCHEMA {
        return Err(Error::SchemaTooNew {
            found,
            supported: CURRENT_SCHEMA,
        });
    }
    let mut applied = Vec::new();
    for version in found..CURRENT_SCHEMA {
        let step = STEPS
            .iter()
            .find(|s| s.from == version)
            .ok_or_else(|| Error::Storage(format!("no migration from schema {version}")))?;
        (step.apply)(collections)?;
        applied.push(step.summary);
    }
    Ok(applied)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MigrationOutcome {
    pub from: u32,
    pub to: u32,
    pub applied: Vec<&'static str>,
    /// Copy of the pre-migration snapshot, when one was written.
    pub backup: Option<String>,
}

/// Upgrades the snapshot in `data_dir` to the current schema. The original
/// file is kept next to it as `store.json.v<N>.bak`. The upgraded data must
/// deserialize and pass integrity checks before anything is replaced.
pub fn migrate_data_dir(data_dir: &Path) -> Result<MigrationOutcome> {
    let path = data_dir.join(SNAPSHOT_FILE);
    if !path.exists() {
        return Ok(MigrationOutcome {
            from: CURRENT_SCHEMA,
            to: CURRENT_SCHEMA,
            applied: vec![],
            backup: None,
        });
    }
    let raw = fs::read(&path)?;
    let mut doc: Value = serde_json::from_slice(&raw)?;
    let found = schema_version_of(&doc)?;
    let mut collections = match doc.get_mut("collections").map(Value::take) {
        Some(Value::Object(c)) => c,
        _ => return Err(Error::Storage("snapshot has no collections".into())),
    };
    let applied = migrate_collections(found, &mut collections)?;
    if applied.is_empty() {
        return Ok(MigrationOutcome {
            from: found,
            to: found,
            applied,
            backup: None,
        });
    }
    let db: Database = serde_json::from_value(Value::Object(collections))?;
    db.check_integrity()?;

    let backup = data_dir.join(format!("{SNAPSHOT_FILE}.v{found}.bak"));
    write_atomic(&backup, &raw)?;
    super::persist(&path, &db)?;
    Ok(MigrationOutcome {
        from: found,
        to: CURRENT_SCHEMA,
        applied,
        backup: Some(backup.display().to_string()),
    })
}
