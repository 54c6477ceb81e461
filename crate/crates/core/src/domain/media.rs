use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{LifeStage, PartialDate};
use crate::error::{Error, FieldErrors, ValidationCode};
use crate::ids::MediaId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Photo,
    Image,
    Audio,
    Video,
}

impl MediaKind {
    pub fn is_visual(self) -> bool {
        matches!(self, MediaKind::Photo | MediaKind::Image)
    }

    pub fn family(self) -> &'static str {
        match self {
            MediaKind::Photo | MediaKind::Image => "image",
            MediaKind::Audio => "audio",
            MediaKind::Video => "video",
        }
    }
}

/// Lowercase hex SHA-256 digest naming a blob in the media store.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ContentHash(String);

impl ContentHash {
    pub fn of(bytes: &[u8]) -> Self {
        Self(hex::encode(Sha256::digest(bytes)))
    }

    pub fn parse(s: &str) -> Option<Self> {
        let ok = s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        ok.then(|| Self(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ContentHash {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        ContentHash::parse(&s).ok_or_else(|| format!("not a lowercase sha-256 hex digest: {s}"))
    }
}

impl From<ContentHash> for String {
    fn from(h: ContentHash) -> Self {
        h.0
    }
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaAsset {
    pub id: MediaId,
    pub kind: MediaKind,
    pub content_hash: ContentHash,
    pub media_type_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<PartialDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub life_stage: Option<LifeStage>,
    pub byte_length: u64,
}

/// Descriptive fields supplied alongside an upload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaMetadata {
    pub kind: MediaKind,
    pub media_type_label: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default)]
    pub date: Option<PartialDate>,
    #[serde(default)]
    pub life_stage: Option<LifeStage>,
}

pub const ACCEPTED_MEDIA_TYPES: &[&str] = &[
    "image/jpeg",
    "image/png",
    "image/gif",
    "image/webp",
    "audio/mpeg",
    "audio/mp4",
    "audio/ogg",
    "audio/wav",
    "audio/x-wav",
    "audio/webm",
    "video/mp4",
    "video/webm",
    "video/ogg",
    "video/quicktime",
];

impl MediaMetadata {
    /// Normalizes the media type label and checks it against the accepted
    /// list and the declared kind.
    pub fn check(mut self) -> Result<Self, Error> {
        let label = self
            .media_type_label
            .split(';')
            .next()
            .unwrap_or_default()
            .trim()
            .to_ascii_lowercase();
        if !ACCEPTED_MEDIA_TYPES.contains(&label.as_str()) {
            return Err(Error::UnsupportedMediaType(self.media_type_label));
        }
        let mut errors = FieldErrors::default();
        if !label.starts_with(self.kind.family()) {
            errors.push("kind", ValidationCode::MediaKindMismatch);
        }
        if !errors.is_empty() {
            return Err(Error::Validation(errors.into_vec()));
        }
        self.media_type_label = label;
        self.description = crate::domain::people::non_empty(self.description);
        self.location = crate::domain::people::non_empty(self.location);
        Ok(self)
    }
}
