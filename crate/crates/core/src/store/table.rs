use std::collections::BTreeMap;
use std::fmt::Display;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::domain::{
    ClinicalAssessment, MediaAsset, Memory, OutboxEntry, Patient, RelatedPerson, Session, SessionReport,
    TherapistAccount,
};
use crate::error::{EntityKind, Error, Result};
use crate::ids::{AssessmentId, MediaId, MemoryId, OutboxId, PatientId, RelatedPersonId, SessionId, TherapistId};

/// An entity stored in a [`Table`].
pub trait Keyed: Clone {
    type Id: Ord + Copy + Display;
    const KIND: EntityKind;
    fn key(&self) -> Self::Id;
}

/// An entity guarded by optimistic versioning.
pub trait Versioned: Keyed {
    fn record_version(&self) -> u64;
    fn set_record_version(&mut self, v: u64);
}

/// An entity that belongs to exactly one patient.
pub trait Owned {
    fn owner(&self) -> PatientId;
}

macro_rules! keyed {
    ($t:ty, $id:ty, $kind:expr, |$s:ident| $key:expr) => {
        impl Keyed for $t {
            type Id = $id;
            const KIND: EntityKind = $kind;
            fn key(&self) -> $id {
                let $s = self;
                $key
            }
        }
    };
}

macro_rules! versioned {
    ($t:ty) => {
        impl Versioned for $t {
            fn record_version(&self) -> u64 {
                self.record_version
            }
            fn set_record_version(&mut self, v: u64) {
                self.record_version = v;
            }
        }
    };
}

keyed!(Patient, PatientId, EntityKind::Patient, |s| s.id);
keyed!(RelatedPerson, RelatedPersonId, EntityKind::RelatedPerson, |s| s.id);
keyed!(Memory, MemoryId, EntityKind::Memory, |s| s.id);
keyed!(MediaAsset, MediaId, EntityKind::Media, |s| s.id);
keyed!(Session, SessionId, EntityKind::Session, |s| s.id);
keyed!(SessionReport, SessionId, EntityKind::SessionReport, |s| s.session_id);
keyed!(ClinicalAssessment, AssessmentId, EntityKind::Assessment, |s| s.id);
keyed!(TherapistAccount, TherapistId, EntityKind::Therapist, |s| s.id);
keyed!(OutboxEntry, OutboxId, EntityKind::OutboxEntry, |s| s.id);

versioned!(Patient);
versioned!(RelatedPerson);
versioned!(Memory);
versioned!(Session);
versioned!(ClinicalAssessment);

impl Owned for Patient {
    fn owner(&self) -> PatientId {
        self.id
    }
}

macro_rules! owned {
    ($($t:ty),*) => {$(
        impl Owned for $t {
            fn owner(&self) -> PatientId {
                self.patient_id
            }
        }
    )*};
}
owned!(RelatedPerson, Memory, Session, ClinicalAssessment);

/// Id-ordered collection of one entity kind. Serializes as a JSON array.
#[derive(Debug, Clone, PartialEq)]
pub struct Table<T: Keyed> {
    rows: BTreeMap<T::Id, T>,
}

impl<T: Keyed> Default for Table<T> {
    fn default() -> Self {
        Self { rows: BTreeMap::new() }
    }
}

impl<T: Keyed> Table<T> {
    pub fn get(&self, id: T::Id) -> Option<&T> {
        self.rows.get(&id)
    }

    pub fn require(&self, id: T::Id) -> Result<&T> {
        self.rows.get(&id).ok_or_else(|| Error::not_found(T::KIND, id))
    }

    pub fn contains(&self, id: T::Id) -> bool {
        self.rows.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.rows.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = T::Id> + '_ {
        self.rows.keys().copied()
    }

    pub fn as_map(&self) -> &BTreeMap<T::Id, T> {
        &self.rows
    }

    /// Inserts or replaces without any version check. Used for immutable
    /// records and for archive import, which preserves versions verbatim.
    pub fn put(&mut self, row: T) {
        self.rows.insert(row.key(), row);
    }

    pub fn remove(&mut self, id: T::Id) -> Option<T> {
        self.rows.remove(&id)
    }

    pub fn get_mut(&mut self, id: T::Id) -> Result<&mut T> {
        self.rows.get_mut(&id).ok_or_else(|| Error::not_found(T::KIND, id))
    }
}

impl<T: Keyed + Owned> Table<T> {
    pub fn owned_by(&self, patient: PatientId) -> impl Iterator<Item = &T> {
        self.rows.values().filter(move |r| r.owner() == patient)
    }
}

impl<T: Versioned> Table<T> {
    /// Writes `row` if the stored version equals `expected` (0 for a new
    /// row), bumping the version by one. Returns the stored row.
    pub fn upsert(&mut self, mut row: T, expected: u64) -> Result<&T> {
        let id = row.key();
        let actual = self.rows.get(&id).map_or(0, Versioned::record_version);
        if actual != expected {
            return Err(Error::VersionConflict { expected, actual });
        }
        row.set_record_version(expected + 1);
        self.rows.insert(id, row);
        Ok(&self.rows[&id])
    }

    pub fn insert_new(&mut self, row: T) -> Result<&T> {
        self.upsert(row, 0)
    }

    /// Fetches a row for modification after checking its version.
    pub fn checkout(&self, id: T::Id, expected: u64) -> Result<T> {
        let row = self.require(id)?;
        if row.record_version() != expected {
            return Err(Error::VersionConflict {
                expected,
                actual: row.record_version(),
            });
        }
        Ok(row.clone())
    }

    pub fn delete(&mut self, id: T::Id, expected: u64) -> Result<T> {
        self.checkout(id, expected)?;
        Ok(self.rows.remove(&id).expect("checked out"))
    }
}

impl<T: Keyed + Serialize> Serialize for Table<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.rows.values())
    }
}

impl<'de, T: Keyed + DeserializeOwned> Deserialize<'de> for Table<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<T> = Vec::deserialize(d)?;
        let mut table = Table::default();
        for row in rows {
            if table.rows.insert(row.key(), row).is_some() {
                return Err(serde::de::Error::custom(format!("duplicate {} id", T::KIND)));
            }
        }
        Ok(table)
    }
}

impl<T: Keyed> FromIterator<T> for Table<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Self {
            rows: iter.into_iter().map(|r| (r.key(), r)).collect(),
        }
    }
}
