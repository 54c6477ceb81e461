use std::fs;

use recuerdame_core::error::Error;
use recuerdame_core::store::migrate::{migrate_data_dir, CURRENT_SCHEMA};
use recuerdame_core::store::{Store, SNAPSHOT_FILE};
use recuerdame_testkit::fixture::{plan, Fixture};
use recuerdame_testkit::gen;
use serde_json::Value;

/// A persistent fixture with a completed session, its snapshot rewritten
/// into the version 1 layout.
fn downgraded() -> (Fixture, Value) {
    let fx = Fixture::persistent();
    let m = fx
        .clinic
        .create_memory(
            fx.patient.id,
            gen::memory_draft("Bakery", "youngadult", gen::year(1960)),
        )
        .unwrap();
    let s = fx.clinic.plan_session(fx.patient.id, plan(vec![m.id])).unwrap();
    let s = fx.clinic.start_session(s.id, s.record_version).unwrap();
    let report = recuerdame_core::domain::ReportDraft {
        overall_impression: "Talkative".to_string(),
        memory_outcomes: vec![],
        participation_score: 8,
        repeat_recommended: true,
        future_proposals: None,
    };
    fx.clinic
        .end_session(s.id, s.record_version, fx.therapist.id, &report)
        .unwrap();

    let path = fx.dir.path().join("data").join(SNAPSHOT_FILE);
    let current: Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    let mut old = current.clone();
    old["schema_version"] = 1.into();
    let c = old["collections"].as_object_mut().unwrap();
    let reports = c.remove("session_reports").unwrap();
    c.insert("follow_up_reports".into(), reports);
    for mem in c["memories"].as_array_mut().unwrap() {
        let mem = mem.as_object_mut().unwrap();
        let stage = mem.remove("life_stage").unwrap();
        mem.insert("type".into(), stage);
    }
    fs::write(&path, serde_json::to_vec(&old).unwrap()).unwrap();
    (fx, current)
}

#[test]
fn outdated_snapshot_must_be_migrated_first() {
    let (fx, _) = downgraded();
    let data = fx.dir.path().join("data");
    let err = Store::open(&data, &fx.dir.path().join("media")).err().unwrap();
    assert!(matches!(err, Error::SchemaOutdated { found: 1, current } if current == CURRENT_SCHEMA));
}

#[test]
fn migration_upgrades_and_keeps_a_backup() {
    let (fx, current) = downgraded();
    let data = fx.dir.path().join("data");
    let before = fx.clinic.snapshot();
    let outcome = migrate_data_dir(&data).unwrap();
    assert_eq!((outcome.from, outcome.to), (1, CURRENT_SCHEMA));
    assert_eq!(outcome.applied.len(), 1);
    let backup = data.join(format!("{SNAPSHOT_FILE}.v1.bak"));
    assert_eq!(outcome.backup.as_deref(), Some(backup.to_str().unwrap()));
    let saved: Value = serde_json::from_slice(&fs::read(&backup).unwrap()).unwrap();
    assert_eq!(saved["schema_version"], 1);

    let store = Store::open(&data, &fx.dir.path().join("media")).unwrap();
    assert_eq!(*store.snapshot(), *before);
    let upgraded: Value = serde_json::from_slice(&fs::read(data.join(SNAPSHOT_FILE)).unwrap()).unwrap();
    assert_eq!(upgraded, current);

    let again = migrate_data_dir(&data).unwrap();
    assert!(again.applied.is_empty());
    assert_eq!(again.backup, None);
}

#[test]
fn future_snapshot_is_refused_untouched() {
    let fx = Fixture::persistent();
    let path = fx.dir.path().join("data").join(SNAPSHOT_FILE);
    let mut doc: Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    doc["schema_version"] = (CURRENT_SCHEMA + 1).into();
    let raw = serde_json::to_vec(&doc).unwrap();
    fs::write(&path, &raw).unwrap();
    assert_eq!(
        migrate_data_dir(path.parent().unwrap()).unwrap_err().code(),
        "SCHEMA_TOO_NEW"
    );
    assert_eq!(fs::read(&path).unwrap(), raw);
}

#[test]
fn missing_snapshot_is_already_current() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = migrate_data_dir(dir.path()).unwrap();
    assert_eq!(outcome.from, CURRENT_SCHEMA);
    assert!(outcome.applied.is_empty());
}
