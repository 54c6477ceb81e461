//! Command-line entry points.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use chrono::Duration;
use clap::{Parser, Subcommand, ValueEnum};
use recuerdame_core::clock::SystemClock;
use recuerdame_core::ids::PatientId;
use recuerdame_core::service::Clinic;
use recuerdame_core::store::archive::{export_archive, import_archive, ExportScope, ImportMode};
use recuerdame_core::store::migrate::migrate_data_dir;
use recuerdame_core::store::Store;
use recuerdame_core::Error;
use serde_json::json;

use crate::auth::{self, TokenKey};
use crate::config::Config;
use crate::outbox::{self, Dispatcher};
use crate::{demo, routes, AppState};

#[derive(Debug, Parser)]
#[command(name = "recuerdame", version, about = "Reminiscence therapy clinic service")]
pub struct Cli {
    /// TOML configuration file. RECUERDAME_* environment variables override it.
    #[arg(long, global = true, env = "RECUERDAME_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API and the outbox worker.
    Serve,
    /// Upgrade the data directory to the current schema, keeping a backup.
    Migrate,
    /// Write a zip archive of the store (or one patient) and its media.
    Export {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        patient: Option<PatientId>,
    },
    /// Load an archive produced by `export`.
    Import {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "fresh")]
        mode: Mode,
    },
    /// Register a therapist (or find one by email) and print a new bearer
    /// token. Any earlier token for that therapist stops working.
    CreateTherapist {
        #[arg(long)]
        name: String,
        #[arg(long)]
        email: String,
    },
    /// Add a demo patient with memories, photos, a session and an assessment
    /// for the therapist with the given email.
    SeedDemo {
        #[arg(long)]
        therapist_email: String,
    },
    /// Re-hash every stored media file and check every asset has its blob.
    VerifyMedia,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Fresh,
    Merge,
}

fn open_clinic(config: &Config) -> anyhow::Result<Clinic> {
    let store = match Store::open(&config.data_dir, &config.media_dir) {
        Err(Error::SchemaOutdated { found, current }) => {
            bail!("data directory is at schema {found}, this build needs {current}; run `recuerdame migrate` first")
        }
        other => other.with_context(|| format!("opening store in {}", config.data_dir.display()))?,
    };
    Ok(Clinic::new(Arc::new(store), Arc::new(SystemClock)))
}

fn print(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("JSON values serialize")
    );
}

fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

/// Runs a parsed command. Returns the process exit code.
pub fn run(cli: Cli) -> anyhow::Result<i32> {
    let config = Config::from_process_env(cli.config.as_deref())?;
    match cli.command {
        Command::Serve => {
            let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            runtime.block_on(serve(config))?;
        }
        Command::Migrate => {
            let outcome = migrate_data_dir(&config.data_dir)?;
            print(&serde_json::to_value(&outcome)?);
        }
        Command::Export { out, patient } => {
            let clinic = open_clinic(&config)?;
            let scope = patient.map_or(ExportScope::All, ExportScope::Patient);
            let bytes = export_archive(clinic.store(), scope, clinic.now())?;
            write_atomic(&out, &bytes)?;
            print(&json!({ "archive": out, "bytes": bytes.len() }));
        }
        Command::Import { input, mode } => {
            let clinic = open_clinic(&config)?;
            let bytes = std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let mode = match mode {
                Mode::Fresh => ImportMode::Fresh,
                Mode::Merge => ImportMode::Merge,
            };
            let report = import_archive(clinic.store(), &bytes, mode)?;
            print(&serde_json::to_value(&report)?);
        }
        Command::CreateTherapist { name, email } => {
            let clinic = open_clinic(&config)?;
            let (account, created) = clinic.register_therapist(&name, &email)?;
            let key = TokenKey::new(config.token_secret.as_bytes());
            let expires_at = clinic.now() + Duration::days(config.token_ttl_days);
            let token = auth::provision(&clinic, &key, account.id, expires_at)?;
            print(&json!({
                "therapist_id": account.id,
                "email": account.email,
                "created": created,
                "token": token,
                "expires_at": expires_at,
            }));
        }
        Command::SeedDemo { therapist_email } => {
            let clinic = open_clinic(&config)?;
            let wanted = therapist_email.trim().to_lowercase();
            let Some(t) = clinic
                .list_therapists()
                .into_iter()
                .find(|t| t.email.to_lowercase() == wanted)
            else {
                bail!("no therapist with email {therapist_email}; run create-therapist first");
            };
            let summary = demo::seed(&clinic, t.id)?;
            print(&serde_json::to_value(&summary)?);
        }
        Command::VerifyMedia => {
            let clinic = open_clinic(&config)?;
            let report = clinic.store().blobs().verify_all()?;
            let db = clinic.snapshot();
            let missing: Vec<_> = db
                .media_assets
                .values()
                .filter(|a| !clinic.store().blobs().contains(&a.content_hash))
                .map(|a| a.id.to_string())
                .collect();
            let ok = report.is_clean() && missing.is_empty();
            print(&json!({ "ok": ok, "blobs": report, "assets_without_blob": missing }));
            return Ok(if ok { 0 } else { 2 });
        }
    }
    Ok(0)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

pub async fn serve(config: Config) -> anyhow::Result<()> {
    let clinic = open_clinic(&config)?;
    let state = AppState::new(clinic, TokenKey::new(config.token_secret.as_bytes()));
    let from = config.outbox.from.parse().context("outbox.from")?;
    let dispatcher = Arc::new(Dispatcher::new(
        state.clinic.clone(),
        outbox::transport_from_config(&config.outbox)?,
        from,
        config.outbox.max_attempts,
    ));

    let (stop_tx, stop_rx) = tokio::sync::watch::channel(false);
    let worker = tokio::spawn(outbox::run_worker(
        dispatcher,
        state.outbox_wake.clone(),
        std::time::Duration::from_secs(config.outbox.poll_seconds.max(1)),
        async move {
            let mut rx = stop_rx;
            let _ = rx.wait_for(|stop| *stop).await;
        },
    ));

    let app = routes::router(state, config.max_request_bytes);
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .with_context(|| format!("binding {}", config.listen))?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown_signal())
        .await?;
    let _ = stop_tx.send(true);
    let _ = worker.await;
    Ok(())
}
