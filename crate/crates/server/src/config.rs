//! Server configuration: a TOML file with `RECUERDAME_*` environment
//! overrides applied on top.

use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

pub const ENV_PREFIX: &str = "RECUERDAME_";
const MIN_SECRET_BYTES: usize = 32;

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    pub media_dir: PathBuf,
    /// HMAC key for bearer tokens.
    pub token_secret: String,
    pub token_ttl_days: i64,
    /// Upper bound on any request body, uploads included.
    pub max_request_bytes: usize,
    pub outbox: OutboxConfig,
}

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutboxConfig {
    pub transport: TransportKind,
    pub drop_dir: PathBuf,
    pub from: String,
    pub poll_seconds: u64,
    pub max_attempts: u32,
    pub smtp: SmtpConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportKind {
    FileDrop,
    Smtp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmtpTls {
    None,
    Starttls,
    Tls,
}

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmtpConfig {
    pub host: String,
    pub port: u16,
    pub username: Option<String>,
    pub password: Option<String>,
    pub tls: SmtpTls,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: PathBuf::from("data"),
            media_dir: PathBuf::from("media"),
            token_secret: String::new(),
            token_ttl_days: 365,
            max_request_bytes: 25 * 1024 * 1024,
            outbox: OutboxConfig::default(),
        }
    }
}

impl Default for OutboxConfig {
    fn default() -> Self {
        Self {
            transport: TransportKind::FileDrop,
            drop_dir: PathBuf::from("outbox"),
            from: "Recuerdame <no-reply@localhost>".to_string(),
            poll_seconds: 5,
            max_attempts: 25,
            smtp: SmtpConfig::default(),
        }
    }
}

impl Default for SmtpConfig {
    fn default() -> Self {
        Self {
            host: "localhost".to_string(),
            port: 587,
            username: None,
            password: None,
            tls: SmtpTls::Starttls,
        }
    }
}

// Secrets are kept out of Debug output so configs can be logged.
impl fmt::Debug for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Config")
            .field("listen", &self.listen)
            .field("data_dir", &self.data_dir)
            .field("media_dir", &self.media_dir)
            .field("token_secret", &"<redacted>")
            .field("token_ttl_days", &self.token_ttl_days)
            .field("max_request_bytes", &self.max_request_bytes)
            .field("outbox", &self.outbox)
            .finish()
    }
}

impl fmt::Debug for OutboxConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OutboxConfig")
            .field("transport", &self.transport)
            .field("drop_dir", &self.drop_dir)
            .field("from", &self.from)
            .field("poll_seconds", &self.poll_seconds)
            .field("max_attempts", &self.max_attempts)
            .field("smtp", &self.smtp)
            .finish()
    }
}

impl fmt::Debug for SmtpConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmtpConfig")
            .field("host", &self.host)
            .field("port", &self.port)
            .field("username", &self.username)
            .field("password", &self.password.as_ref().map(|_| "<redacted>"))
            .field("tls", &self.tls)
            .finish()
    }
}

impl Config {
    /// Reads `path` (if given), then applies overrides from `env`, then
    /// validates. `env` is a lookup so tests need not touch the process
    /// environment.
    pub fn load(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> anyhow::Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => Config::default(),
        };
        config.apply_env(env)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_process_env(path: Option<&Path>) -> anyhow::Result<Self> {
        Self::load(path, |k| std::env::var(k).ok())
    }

    fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> anyhow::Result<()> {
        let get = |name: &str| env(&format!("{ENV_PREFIX}{name}"));
        if let Some(v) = get("LISTEN") {
            self.listen = v.parse().with_context(|| format!("{ENV_PREFIX}LISTEN={v}"))?;
        }
        if let Some(v) = get("DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = get("MEDIA_DIR") {
            self.media_dir = v.into();
        }
        if let Some(v) = get("TOKEN_SECRET") {
            self.token_secret = v;
        }
        if let Some(v) = get("TOKEN_TTL_DAYS") {
            self.token_ttl_days = v.parse().context("TOKEN_TTL_DAYS")?;
        }
        if let Some(v) = get("MAX_REQUEST_BYTES") {
            self.max_request_bytes = v.parse().context("MAX_REQUEST_BYTES")?;
        }
        if let Some(v) = get("OUTBOX_TRANSPORT") {
            self.outbox.transport = match v.as_str() {
                "file-drop" => TransportKind::FileDrop,
                "smtp" => TransportKind::Smtp,
                other => bail!("{ENV_PREFIX}OUTBOX_TRANSPORT must be file-drop or smtp, got {other}"),
            };
        }
        if let Some(v) = get("OUTBOX_DIR") {
            self.outbox.drop_dir = v.into();
        }
        if let Some(v) = get("MAIL_FROM") {
            self.outbox.from = v;
        }
        if let Some(v) = get("SMTP_HOST") {
            self.outbox.smtp.host = v;
        }
        if let Some(v) = get("SMTP_PORT") {
            self.outbox.smtp.port = v.parse().context("SMTP_PORT")?;
        }
        if let Some(v) = get("SMTP_USERNAME") {
            self.outbox.smtp.username = Some(v);
        }
        if let Some(v) = get("SMTP_PASSWORD") {
            self.outbox.smtp.password = Some(v);
        }
        if let Some(v) = get("SMTP_TLS") {
            self.outbox.smtp.tls = match v.as_str() {
                "none" => SmtpTls::None,
                "starttls" => SmtpTls::Starttls,
                "tls" => SmtpTls::Tls,
                other => bail!("{ENV_PREFIX}SMTP_TLS must be none, starttls or tls, got {other}"),
            };
        }
        Ok(())
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.token_secret.len() < MIN_SECRET_BYTES {
            bail!("token_secret must be at least {MIN_SECRET_BYTES} bytes (set it in the config file or {ENV_PREFIX}TOKEN_SECRET)");
        }
        if self.token_ttl_days <= 0 {
            bail!("token_ttl_days must be positive");
        }
        if self.max_request_bytes == 0 {
            bail!("max_request_bytes must be positive");
        }
        if self.outbox.max_attempts == 0 {
            bail!("outbox.max_attempts must be at least 1");
        }
        if self.outbox.from.parse::<lettre::message::Mailbox>().is_err() {
            bail!("outbox.from is not a valid mailbox: {}", self.outbox.from);
        }
        if self.outbox.smtp.username.is_some() != self.outbox.smtp.password.is_some() {
            bail!("outbox.smtp needs both username and password, or neither");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    const SECRET: &str = "0123456789abcdef0123456789abcdef";

    fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| map.get(k).cloned()
    }

    #[test]
    fn file_then_environment() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("recuerdame.toml");
        std::fs::write(
            &path,
            format!(
                r#"
listen = "0.0.0.0:9000"
data_dir = "/srv/data"
token_secret = "{SECRET}"

[outbox]
transport = "smtp"
from = "Clinic <clinic@example.org>"

[outbox.smtp]
host = "mail.example.org"
port = 2525
tls = "none"
"#
            ),
        )
        .unwrap();
        let c = Config::load(
            Some(&path),
            env(&[("RECUERDAME_DATA_DIR", "/override"), ("RECUERDAME_SMTP_PORT", "25")]),
        )
        .unwrap();
        assert_eq!(c.listen.port(), 9000);
        assert_eq!(c.data_dir, PathBuf::from("/override"));
        assert_eq!(c.media_dir, PathBuf::from("media"));
        assert_eq!(c.outbox.transport, TransportKind::Smtp);
        assert_eq!(c.outbox.smtp.host, "mail.example.org");
        assert_eq!(c.outbox.smtp.port, 25);
        assert_eq!(c.outbox.smtp.tls, SmtpTls::None);
    }

    #[test]
    fn secret_is_required_and_redacted() {
        assert!(Config::load(None, env(&[])).is_err());
        assert!(Config::load(None, env(&[("RECUERDAME_TOKEN_SECRET", "short")])).is_err());
        let c = Config::load(
            None,
            env(&[
                ("RECUERDAME_TOKEN_SECRET", SECRET),
                ("RECUERDAME_SMTP_USERNAME", "u"),
                ("RECUERDAME_SMTP_PASSWORD", "hunter22"),
            ]),
        )
        .unwrap();
        let shown = format!("{c:?}");
        assert!(!shown.contains(SECRET));
        assert!(!shown.contains("hunter22"));
    }

    #[test]
    fn rejects_bad_values() {
        let base = [("RECUERDAME_TOKEN_SECRET", SECRET)];
        for (k, v) in [
            ("RECUERDAME_LISTEN", "nowhere"),
            ("RECUERDAME_OUTBOX_TRANSPORT", "pigeon"),
            ("RECUERDAME_MAIL_FROM", "not an address"),
            ("RECUERDAME_SMTP_USERNAME", "only-user"),
        ] {
            let mut pairs = base.to_vec();
            pairs.push((k, v));
            assert!(Config::load(None, env(&pairs)).is_err(), "{k}={v}");
        }
    }

    #[test]
    fn example_config_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("example.toml");
        std::fs::write(&path, include_str!("../../../docs/recuerdame.example.toml")).unwrap();
        let c = Config::load(Some(&path), env(&[])).unwrap();
        assert_eq!(c.outbox.transport, TransportKind::FileDrop);
        assert_eq!(c.outbox.max_attempts, 25);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, format!("token_secret = \"{SECRET}\"\nlisten_addr = \"x\"\n")).unwrap();
        assert!(Config::load(Some(&path), env(&[])).is_err());
    }
}
