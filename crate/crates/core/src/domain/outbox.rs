use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ids::{OutboxId, RelatedPersonId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutboxStatus {
    Queued,
    Sent,
    Failed,
}

impl OutboxStatus {
    /// Queued→Sent, Queued→Failed, and Failed→Queued for a retry.
    pub fn can_transition_to(self, to: OutboxStatus) -> bool {
        matches!(
            (self, to),
            (OutboxStatus::Queued, OutboxStatus::Sent)
                | (OutboxStatus::Queued, OutboxStatus::Failed)
                | (OutboxStatus::Failed, OutboxStatus::Queued)
        )
    }
}

/// A persisted email waiting for (or done with) delivery.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboxEntry {
    pub id: OutboxId,
    pub to_email: String,
    pub subject: String,
    pub body: String,
    pub related_person_id: RelatedPersonId,
    pub created_at: DateTime<Utc>,
    pub status: OutboxStatus,
    pub attempts: u32,
    /// Earliest time the worker may pick the entry up again.
    pub next_attempt_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sent_at: Option<DateTime<Utc>>,
}
