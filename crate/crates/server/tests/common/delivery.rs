//! At-least-once delivery over an unreliable transport.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use chrono::Duration;
use lettre::Message;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use recuerdame_core::domain::{OutboxEntry, OutboxStatus, RelatedPersonDraft};
use recuerdame_core::service::Clinic;
use recuerdame_server::outbox::{Dispatcher, FileDrop, Transport};
use recuerdame_testkit::fixture::Fixture;

pub const FROM: &str = "Recuerdame <no-reply@clinic.example>";

/// Fails a seeded fraction of deliveries. Half of the failures happen
/// after the file is already written, like an SMTP server that accepts the
/// message and then drops the connection before replying.
pub struct Flaky {
    inner: FileDrop,
    rng: Mutex<StdRng>,
    fail_rate: f64,
    pub calls: Mutex<usize>,
}

impl Flaky {
    pub fn new(dir: &Path, seed: u64, fail_rate: f64) -> Self {
        Self {
            inner: FileDrop::new(dir).unwrap(),
            rng: Mutex::new(StdRng::seed_from_u64(seed)),
            fail_rate,
            calls: Mutex::new(0),
        }
    }
}

impl Transport for Flaky {
    fn deliver(&self, message: &Message, entry: &OutboxEntry) -> Result<(), String> {
        *self.calls.lock().unwrap() += 1;
        let (fail, late) = {
            let mut rng = self.rng.lock().unwrap();
            (rng.random_bool(self.fail_rate), rng.random_bool(0.5))
        };
        if fail && !late {
            return Err("connection refused".into());
        }
        self.inner.deliver(message, entry)?;
        if fail {
            return Err("connection reset after DATA".into());
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct DeliveryStats {
    pub emails: usize,
    pub rounds: usize,
    pub transport_calls: usize,
    pub max_attempts_used: u32,
}

/// Queues `count` emails to distinct relatives, pushes them through a
/// transport failing at `fail_rate`, advancing the clock past the longest
/// backoff between rounds, and checks every entry ends `Sent` with its
/// dropped file naming the right recipient and subject.
pub fn at_least_once(seed: u64, count: usize, fail_rate: f64, max_attempts: u32) -> Result<DeliveryStats, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let Fixture {
        clinic,
        clock,
        patient,
        dir: _media,
        ..
    } = Fixture::new();
    let clinic = Arc::new(clinic);
    let mut expected = BTreeMap::new();
    for i in 0..count {
        let rp = clinic
            .create_related_person(
                patient.id,
                RelatedPersonDraft {
                    display_name: format!("Relative {i}"),
                    relationship_type: "child".into(),
                    contact_email: Some(format!("relative{i}@family.example")),
                    ..Default::default()
                },
            )
            .map_err(|e| e.to_string())?;
        let e = enqueue(&clinic, rp.id, i)?;
        expected.insert(e.id, (e.to_email, e.subject));
    }

    let drop_dir = dir.path().join("drop");
    let transport = Arc::new(Flaky::new(&drop_dir, seed, fail_rate));
    let dispatcher = Dispatcher::new(clinic.clone(), transport.clone(), FROM.parse().unwrap(), max_attempts);
    let round_limit = 2 * max_attempts as usize;
    let mut rounds = 0;
    while clinic.outbox().iter().any(|e| e.status != OutboxStatus::Sent) {
        if rounds == round_limit {
            return Err(format!("entries still unsent after {rounds} rounds"));
        }
        dispatcher.run_once().map_err(|e| e.to_string())?;
        clock.advance(Duration::hours(1));
        rounds += 1;
    }

    let entries = clinic.outbox();
    let max_attempts_used = entries.iter().map(|e| e.attempts).max().unwrap_or(0);
    if max_attempts_used > max_attempts {
        return Err(format!(
            "an entry took {max_attempts_used} attempts, limit {max_attempts}"
        ));
    }
    let files = std::fs::read_dir(&drop_dir).map_err(|e| e.to_string())?.count();
    if files != count {
        return Err(format!("{files} files in the drop directory, expected {count}"));
    }
    for (id, (to, subject)) in &expected {
        let raw = std::fs::read(drop_dir.join(format!("{id}.eml"))).map_err(|e| format!("{id}: {e}"))?;
        let (got_to, got_subject) = parse_eml(&raw)?;
        if !got_to.contains(to.as_str()) || &got_subject != subject {
            return Err(format!(
                "{id}: dropped To={got_to:?} Subject={got_subject:?}, queued {to} / {subject}"
            ));
        }
    }
    let transport_calls = *transport.calls.lock().unwrap();
    Ok(DeliveryStats {
        emails: count,
        rounds,
        transport_calls,
        max_attempts_used,
    })
}

fn enqueue(clinic: &Clinic, rp: recuerdame_core::ids::RelatedPersonId, i: usize) -> Result<OutboxEntry, String> {
    clinic
        .enqueue_email(
            rp,
            &format!("Sesión {i}: próxima cita"),
            "Hola,\nnos vemos el martes.\n",
        )
        .map_err(|e| e.to_string())
}

/// Recipient header and decoded subject of an RFC 5322 message.
pub fn parse_eml(raw: &[u8]) -> Result<(String, String), String> {
    use mailparse::MailHeaderMap;
    let mail = mailparse::parse_mail(raw).map_err(|e| e.to_string())?;
    let to = mail.headers.get_first_value("To").ok_or("no To header")?;
    let subject = mail.headers.get_first_value("Subject").ok_or("no Subject header")?;
    Ok((to, subject))
}
