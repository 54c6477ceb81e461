use std::path::Path;
use std::process::{Command, Output};

use recuerdame_core::store::SNAPSHOT_FILE;
use recuerdame_server::auth::credential_digest;
use serde_json::Value;

const SECRET: &str = "cli-test-secret-cli-test-secret-0";

struct Env {
    dir: tempfile::TempDir,
}

impl Env {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn root(&self) -> &Path {
        self.dir.path()
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_recuerdame"))
            .args(args)
            .env_remove("RECUERDAME_CONFIG")
            .env("RECUERDAME_TOKEN_SECRET", SECRET)
            .env("RECUERDAME_DATA_DIR", self.root().join("data"))
            .env("RECUERDAME_MEDIA_DIR", self.root().join("media"))
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Value {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        serde_json::from_slice(&out.stdout).unwrap()
    }
}

#[test]
fn therapist_demo_export_import_verify() {
    let a = Env::new();
    let t = a.ok(&[
        "create-therapist",
        "--name",
        "Ana Ruiz",
        "--email",
        "ana@clinic.example",
    ]);
    assert_eq!(t["created"], true);
    assert!(t["token"].as_str().unwrap().starts_with("rcd1."));
    let again = a.ok(&[
        "create-therapist",
        "--name",
        "Ana Ruiz",
        "--email",
        "ANA@clinic.example",
    ]);
    assert_eq!(
        (again["created"].clone(), again["therapist_id"].clone()),
        (Value::Bool(false), t["therapist_id"].clone())
    );
    assert_ne!(again["token"], t["token"]);

    let seeded = a.ok(&["seed-demo", "--therapist-email", "ana@clinic.example"]);
    let repeat = a.ok(&["seed-demo", "--therapist-email", "ana@clinic.example"]);
    assert_eq!(seeded["patient_id"], repeat["patient_id"]);
    assert_eq!(a.ok(&["verify-media"])["ok"], true);

    let archive = a.root().join("all.zip");
    let exported = a.ok(&["export", "--out", archive.to_str().unwrap()]);
    assert!(exported["bytes"].as_u64().unwrap() > 0);
    let digest = credential_digest(again["token"].as_str().unwrap());
    assert!(std::fs::read_to_string(a.root().join("data").join(SNAPSHOT_FILE))
        .unwrap()
        .contains(&digest));

    let b = Env::new();
    let report = b.ok(&["import", "--in", archive.to_str().unwrap()]);
    assert!(report["blobs_written"].as_u64().unwrap() > 0);
    assert_eq!(b.ok(&["verify-media"])["ok"], true);
    // Therapist rows travel, their credentials do not.
    let imported = std::fs::read_to_string(b.root().join("data").join(SNAPSHOT_FILE)).unwrap();
    assert!(imported.contains("ana@clinic.example"));
    assert!(!imported.contains(&digest));

    let merge = b.ok(&["import", "--in", archive.to_str().unwrap(), "--mode", "merge"]);
    assert!(merge["imported"].as_object().unwrap().values().all(|n| n == 0));
    let refused = b.run(&["import", "--in", archive.to_str().unwrap()]);
    assert!(!refused.status.success());
    assert!(String::from_utf8_lossy(&refused.stderr).contains("store is not empty"));
}

#[test]
fn patient_export_and_unknown_therapist() {
    let a = Env::new();
    a.ok(&[
        "create-therapist",
        "--name",
        "Ana Ruiz",
        "--email",
        "ana@clinic.example",
    ]);
    let seeded = a.ok(&["seed-demo", "--therapist-email", "ana@clinic.example"]);
    let pid = seeded["patient_id"].as_str().unwrap();
    let out = a.root().join("one.zip");
    a.ok(&["export", "--patient", pid, "--out", out.to_str().unwrap()]);
    assert!(out.exists());
    assert!(!a
        .run(&["seed-demo", "--therapist-email", "nobody@clinic.example"])
        .status
        .success());
}

#[test]
fn corrupted_media_is_reported() {
    let a = Env::new();
    a.ok(&[
        "create-therapist",
        "--name",
        "Ana Ruiz",
        "--email",
        "ana@clinic.example",
    ]);
    a.ok(&["seed-demo", "--therapist-email", "ana@clinic.example"]);
    let blob = walk(&a.root().join("media")).into_iter().next().expect("a stored blob");
    let mut bytes = std::fs::read(&blob).unwrap();
    bytes[0] ^= 0xFF;
    std::fs::write(&blob, bytes).unwrap();
    let out = a.run(&["verify-media"]);
    assert_eq!(out.status.code(), Some(2));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["ok"], false);
    assert_eq!(report["blobs"]["mismatched"].as_array().unwrap().len(), 1);
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn outdated_data_dir_needs_migrate() {
    let a = Env::new();
    a.ok(&[
        "create-therapist",
        "--name",
        "Ana Ruiz",
        "--email",
        "ana@clinic.example",
    ]);
    a.ok(&["seed-demo", "--therapist-email", "ana@clinic.example"]);
    let path = a.root().join("data").join(SNAPSHOT_FILE);
    let mut doc: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    doc["schema_version"] = 1.into();
    let c = doc["collections"].as_object_mut().unwrap();
    let reports = c.remove("session_reports").unwrap();
    c.insert("follow_up_reports".into(), reports);
    for m in c["memories"].as_array_mut().unwrap() {
        let m = m.as_object_mut().unwrap();
        let stage = m.remove("life_stage").unwrap();
        m.insert("type".into(), stage);
    }
    std::fs::write(&path, serde_json::to_vec(&doc).unwrap()).unwrap();

    let blocked = a.run(&["verify-media"]);
    assert!(!blocked.status.success());
    assert!(String::from_utf8_lossy(&blocked.stderr).contains("recuerdame migrate"));
    let outcome = a.ok(&["migrate"]);
    assert_eq!(
        (outcome["from"].as_u64(), outcome["applied"].as_array().unwrap().len()),
        (Some(1), 1)
    );
    assert_eq!(a.ok(&["verify-media"])["ok"], true);
    assert!(a.ok(&["migrate"])["applied"].as_array().unwrap().is_empty());
}

#[test]
fn missing_secret_is_a_startup_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_recuerdame"))
        .arg("verify-media")
        .env_remove("RECUERDAME_TOKEN_SECRET")
        .env_remove("RECUERDAME_CONFIG")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("token_secret"));
}
