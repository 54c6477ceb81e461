//! Month and range views over a patient's sessions.

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate};
use recuerdame_core::domain::{Patient, Session, SessionStatus};
use recuerdame_core::ids::{PatientId, SessionId};
use serde::Serialize;

const TITLE_CHARS: usize = 60;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CalendarEntry {
    pub session_id: SessionId,
    pub patient_id: PatientId,
    pub scheduled_at: DateTime<FixedOffset>,
    pub status: SessionStatus,
    pub title: String,
}

/// Sessions whose local date (in the offset they were scheduled with) falls
/// in `from..=to`, earliest first. Cancelled sessions are left out.
pub fn entries(patient: &Patient, sessions: &[Session], from: NaiveDate, to: NaiveDate) -> Vec<CalendarEntry> {
    let mut out: Vec<_> = sessions
        .iter()
        .filter(|s| s.patient_id == patient.id && s.status != SessionStatus::Cancelled)
        .filter(|s| (from..=to).contains(&s.scheduled_at.date_naive()))
        .map(|s| CalendarEntry {
            session_id: s.id,
            patient_id: s.patient_id,
            scheduled_at: s.scheduled_at,
            status: s.status,
            title: title(&patient.display_name, &s.objectives),
        })
        .collect();
    out.sort_by(|a, b| {
        a.scheduled_at
            .cmp(&b.scheduled_at)
            .then(a.session_id.cmp(&b.session_id))
    });
    out
}

fn title(name: &str, objectives: &str) -> String {
    let line = objectives.lines().next().unwrap_or("").trim();
    let short = match line.char_indices().nth(TITLE_CHARS) {
        Some((cut, _)) => format!("{}...", line[..cut].trim_end()),
        None => line.to_string(),
    };
    if short.is_empty() {
        name.to_string()
    } else {
        format!("{name}: {short}")
    }
}

/// First and last day of a calendar month.
pub fn month_bounds(year: i32, month: u32) -> Option<(NaiveDate, NaiveDate)> {
    let first = NaiveDate::from_ymd_opt(year, month, 1)?;
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)?
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)?
    };
    Some((first, next.pred_opt()?))
}

pub fn month_of(day: NaiveDate) -> (NaiveDate, NaiveDate) {
    month_bounds(day.year(), day.month()).expect("a real date has a real month")
}
