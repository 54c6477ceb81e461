use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::domain::ContentHash;
use crate::error::{Error, Result};

/// Flat directory of blobs, each named by the lowercase hex SHA-256 of its
/// bytes. Identical content is stored once.
#[derive(Debug, Clone)]
pub struct BlobStore {
    root: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BlobVerifyReport {
    pub checked: usize,
    /// (file name, actual digest) for every blob whose content no longer
    /// matches its name.
    pub mismatched: Vec<(String, String)>,
    /// Files in the media directory that are not named like a blob.
    pub foreign_files: Vec<String>,
}

impl BlobVerifyReport {
    pub fn is_clean(&self) -> bool {
        self.mismatched.is_empty()
    }
}

impl BlobStore {
    pub fn open(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, hash: &ContentHash) -> PathBuf {
        self.root.join(hash.as_str())
    }

    pub fn contains(&self, hash: &ContentHash) -> bool {
        self.path_of(hash).is_file()
    }

    /// Stores `bytes` and returns their hash. Returns `true` alongside when a
    /// new blob file was written.
    pub fn put(&self, bytes: &[u8]) -> Result<(ContentHash, bool)> {
        if bytes.is_empty() {
            return Err(Error::EmptyContent);
        }
        let hash = ContentHash::of(bytes);
        let path = self.path_of(&hash);
        if path.is_file() {
            return Ok((hash, false));
        }
        super::write_atomic(&path, bytes)?;
        Ok((hash, true))
    }

    pub fn get(&self, hash: &ContentHash) -> Result<Vec<u8>> {
        match fs::read(self.path_of(hash)) {
            Ok(bytes) => Ok(bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MediaUnresolved(hash.to_string())),
            Err(e) => Err(e.into()),
        }
    }

    /// Re-hashes every blob file and reports any whose digest differs from
    /// its name.
    pub fn verify_all(&self) -> Result<BlobVerifyReport> {
        let mut report = BlobVerifyReport::default();
        let mut names: Vec<_> = fs::read_dir(&self.root)?
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| !n.starts_with(".tmp-"))
            .collect();
        names.sort();
        for name in names {
            if ContentHash::parse(&name).is_none() {
                report.foreign_files.push(name);
                continue;
            }
            let bytes = fs::read(self.root.join(&name))?;
            let actual = ContentHash::of(&bytes);
            report.checked += 1;
            if actual.as_str() != name {
                report.mismatched.push((name, actual.to_string()));
            }
        }
        Ok(report)
    }
}
