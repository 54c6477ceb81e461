use std::cmp::Ordering;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{FieldError, ValidationCode};

pub const MIN_YEAR: i64 = 1850;
pub const MAX_YEAR: i64 = 2100;

/// A calendar date known to year, month, or day precision.
///
/// Ordering of memories uses [`PartialDate::normal_form`], where a missing
/// month or day counts as 1. The `Ord` impl additionally breaks ties by
/// precision so it stays consistent with equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DateDraft")]
pub struct PartialDate {
    year: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    month: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    day: Option<u8>,
}

/// Unchecked date components as they arrive from a form or JSON body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateDraft {
    pub year: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub month: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("invalid partial date {year}-{month:?}-{day:?}")]
pub struct BadDate {
    pub year: i64,
    pub month: Option<i64>,
    pub day: Option<i64>,
}

impl PartialDate {
    pub fn new(year: i64, month: Option<i64>, day: Option<i64>) -> Result<Self, BadDate> {
        let bad = BadDate { year, month, day };
        if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
            return Err(bad);
        }
        match (month, day) {
            (None, Some(_)) => return Err(bad),
            (Some(m), _) if !(1..=12).contains(&m) => return Err(bad),
            (Some(m), Some(d)) if NaiveDate::from_ymd_opt(year as i32, m as u32, d as u32).is_none() => {
                return Err(bad)
            }
            _ => {}
        }
        Ok(Self {
            year: year as i32,
            month: month.map(|m| m as u8),
            day: day.map(|d| d as u8),
        })
    }

    pub fn year(year: i64) -> Result<Self, BadDate> {
        Self::new(year, None, None)
    }

    pub fn ym(year: i64, month: i64) -> Result<Self, BadDate> {
        Self::new(year, Some(month), None)
    }

    pub fn ymd(year: i64, month: i64, day: i64) -> Result<Self, BadDate> {
        Self::new(year, Some(month), Some(day))
    }

    pub fn year_part(&self) -> i32 {
        self.year
    }

    pub fn month_part(&self) -> Option<u8> {
        self.month
    }

    pub fn day_part(&self) -> Option<u8> {
        self.day
    }

    pub fn normal_form(&self) -> (i32, u8, u8) {
        (self.year, self.month.unwrap_or(1), self.day.unwrap_or(1))
    }

    pub fn to_naive(&self) -> NaiveDate {
        let (y, m, d) = self.normal_form();
        NaiveDate::from_ymd_opt(y, m as u32, d as u32).expect("validated on construction")
    }

    fn precision(&self) -> u8 {
        match (self.month, self.day) {
            (None, _) => 0,
            (Some(_), None) => 1,
            (Some(_), Some(_)) => 2,
        }
    }

    pub fn to_draft(self) -> DateDraft {
        DateDraft {
            year: self.year as i64,
            month: self.month.map(i64::from),
            day: self.day.map(i64::from),
        }
    }
}

impl From<NaiveDate> for PartialDate {
    fn from(d: NaiveDate) -> Self {
        use chrono::Datelike;
        Self {
            year: d.year(),
            month: Some(d.month() as u8),
            day: Some(d.day() as u8),
        }
    }
}

impl Ord for PartialDate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.normal_form()
            .cmp(&other.normal_form())
            .then(self.precision().cmp(&other.precision()))
    }
}

impl PartialOrd for PartialDate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PartialDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}", self.year)?;
        if let Some(m) = self.month {
            write!(f, "-{m:02}")?;
        }
        if let Some(d) = self.day {
            write!(f, "-{d:02}")?;
        }
        Ok(())
    }
}

impl TryFrom<DateDraft> for PartialDate {
    type Error = BadDate;

    fn try_from(d: DateDraft) -> Result<Self, Self::Error> {
        PartialDate::new(d.year, d.month, d.day)
    }
}

impl DateDraft {
    pub fn validate(self, field: &str) -> Result<PartialDate, FieldError> {
        PartialDate::try_from(self).map_err(|_| FieldError::new(field, ValidationCode::BadDate))
    }
}

/// Coarse biography phase. Declaration order is chapter order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifeStage {
    Childhood,
    Adolescence,
    YoungAdult,
    Adult,
    OlderAdult,
}

impl LifeStage {
    pub const ALL: [LifeStage; 5] = [
        LifeStage::Childhood,
        LifeStage::Adolescence,
        LifeStage::YoungAdult,
        LifeStage::Adult,
        LifeStage::OlderAdult,
    ];

    pub fn title(self) -> &'static str {
        match self {
            LifeStage::Childhood => "Childhood",
            LifeStage::Adolescence => "Adolescence",
            LifeStage::YoungAdult => "Young adult",
            LifeStage::Adult => "Adult",
            LifeStage::OlderAdult => "Older adult",
        }
    }

    /// Accepts the snake_case wire form as well as free-text labels such as
    /// "Young adult".
    pub fn parse_label(s: &str) -> Option<Self> {
        match label_key(s).as_str() {
            "childhood" | "child" => Some(LifeStage::Childhood),
            "adolescence" | "adolescent" => Some(LifeStage::Adolescence),
            "youngadult" | "youngadulthood" => Some(LifeStage::YoungAdult),
            "adult" | "adulthood" => Some(LifeStage::Adult),
            "olderadult" | "olderadulthood" | "oldage" => Some(LifeStage::OlderAdult),
            _ => None,
        }
    }
}

/// Lowercases and strips everything but letters and digits, so "At risk of
/// loss", "at_risk_of_loss" and "AtRiskOfLoss" compare equal.
pub(crate) fn label_key(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}
