//! Email delivery for queued outbox entries.
//!
//! Entries are written by request handlers and picked up here. Each
//! attempt is recorded in the store before the next one starts, so a crash
//! at any point leaves every entry either still queued or settled.

use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, SystemTime};

use anyhow::Context;
use lettre::message::header::ContentType;
use lettre::message::Mailbox;
use lettre::transport::smtp::authentication::Credentials;
use lettre::{Message, SmtpTransport};
use recuerdame_core::domain::OutboxEntry;
use recuerdame_core::service::{retry_backoff, Clinic};
use tokio::sync::Notify;

use crate::config::{OutboxConfig, SmtpTls, TransportKind};

pub trait Transport: Send + Sync {
    fn deliver(&self, message: &Message, entry: &OutboxEntry) -> Result<(), String>;
}

/// Builds the RFC 5322 message for an entry. The Message-ID and Date are
/// derived from the entry so a retried send produces the same message.
pub fn compose(entry: &OutboxEntry, from: &Mailbox) -> Result<Message, String> {
    let to: Mailbox = entry
        .to_email
        .parse()
        .map_err(|e| format!("bad recipient {}: {e}", entry.to_email))?;
    Message::builder()
        .from(from.clone())
        .to(to)
        .subject(entry.subject.clone())
        .message_id(Some(format!("<{}@recuerdame.outbox>", entry.id)))
        .date(SystemTime::from(entry.created_at))
        .header(ContentType::TEXT_PLAIN)
        .body(entry.body.clone())
        .map_err(|e| format!("cannot build message: {e}"))
}

/// Writes each message to `<dir>/<outbox id>.eml`.
pub struct FileDrop {
    dir: PathBuf,
}

impl FileDrop {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }
}

impl Transport for FileDrop {
    fn deliver(&self, message: &Message, entry: &OutboxEntry) -> Result<(), String> {
        let path = self.dir.join(format!("{}.eml", entry.id));
        let tmp = self.dir.join(format!(".{}.eml.tmp", entry.id));
        std::fs::write(&tmp, message.formatted())
            .and_then(|_| std::fs::rename(&tmp, &path))
            .map_err(|e| format!("writing {}: {e}", path.display()))
    }
}

pub struct Smtp {
    inner: SmtpTransport,
}

impl Smtp {
    pub fn from_config(c: &crate::config::SmtpConfig) -> anyhow::Result<Self> {
        let builder = match c.tls {
            SmtpTls::None => SmtpTransport::builder_dangerous(&c.host),
            SmtpTls::Starttls => SmtpTransport::starttls_relay(&c.host).context("SMTP STARTTLS setup")?,
            SmtpTls::Tls => SmtpTransport::relay(&c.host).context("SMTP TLS setup")?,
        };
        let mut builder = builder.port(c.port);
        if let (Some(user), Some(pass)) = (&c.username, &c.password) {
            builder = builder.credentials(Credentials::new(user.clone(), pass.clone()));
        }
        Ok(Self { inner: builder.build() })
    }
}

impl Transport for Smtp {
    fn deliver(&self, message: &Message, _entry: &OutboxEntry) -> Result<(), String> {
        lettre::Transport::send(&self.inner, message)
            .map(|_| ())
            .map_err(|e| e.to_string())
    }
}

pub fn transport_from_config(c: &OutboxConfig) -> anyhow::Result<Arc<dyn Transport>> {
    Ok(match c.transport {
        TransportKind::FileDrop => {
            Arc::new(FileDrop::new(&c.drop_dir).with_context(|| format!("creating {}", c.drop_dir.display()))?)
        }
        TransportKind::Smtp => Arc::new(Smtp::from_config(&c.smtp)?),
    })
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct RunStats {
    pub requeued: usize,
    pub attempted: usize,
    pub sent: usize,
    pub failed: usize,
}

pub struct Dispatcher {
    clinic: Arc<Clinic>,
    transport: Arc<dyn Transport>,
    from: Mailbox,
    max_attempts: u32,
}

impl Dispatcher {
    pub fn new(clinic: Arc<Clinic>, transport: Arc<dyn Transport>, from: Mailbox, max_attempts: u32) -> Self {
        Self {
            clinic,
            transport,
            from,
            max_attempts,
        }
    }

    /// Requeues failed entries whose backoff has passed, then makes one
    /// attempt at every due entry.
    pub fn run_once(&self) -> recuerdame_core::Result<RunStats> {
        let now = self.clinic.now();
        let mut stats = RunStats {
            requeued: self.clinic.requeue_failed(now, self.max_attempts)?,
            ..RunStats::default()
        };
        for entry in self.clinic.due_outbox(now) {
            let outcome = compose(&entry, &self.from).and_then(|m| self.transport.deliver(&m, &entry));
            stats.attempted += 1;
            match &outcome {
                Ok(()) => stats.sent += 1,
                Err(e) => {
                    stats.failed += 1;
                    tracing::warn!(outbox_id = %entry.id, attempt = entry.attempts + 1, error = %e, "email delivery failed");
                }
            }
            let retry_at = now + retry_backoff(entry.attempts + 1);
            self.clinic.record_delivery(entry.id, outcome, now, retry_at)?;
        }
        Ok(stats)
    }
}

/// Runs the dispatcher every `poll`, or sooner when `wake` fires, until
/// `shutdown` resolves.
pub async fn run_worker(
    dispatcher: Arc<Dispatcher>,
    wake: Arc<Notify>,
    poll: Duration,
    shutdown: impl Future<Output = ()>,
) {
    tokio::pin!(shutdown);
    loop {
        let d = dispatcher.clone();
        match tokio::task::spawn_blocking(move || d.run_once()).await {
            Ok(Ok(stats)) if stats.attempted > 0 => {
                tracing::info!(sent = stats.sent, failed = stats.failed, "outbox pass")
            }
            Ok(Ok(_)) => {}
            Ok(Err(e)) => tracing::error!(error = %e, "outbox pass failed"),
            Err(e) => tracing::error!(error = %e, "outbox task panicked"),
        }
        tokio::select! {
            _ = &mut shutdown => break,
            _ = wake.notified() => {}
            _ = tokio::time::sleep(poll) => {}
        }
    }
    tracing::info!("outbox worker stopped");
}
