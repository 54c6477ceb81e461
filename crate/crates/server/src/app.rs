use std::sync::Arc;

use recuerdame_core::service::Clinic;
use tokio::sync::Notify;

use crate::auth::TokenKey;

/// Shared by every request handler.
#[derive(Clone)]
pub struct AppState {
    pub clinic: Arc<Clinic>,
    pub key: TokenKey,
    /// Poked after an email is queued so the worker need not wait a full poll.
    pub outbox_wake: Arc<Notify>,
}

impl AppState {
    pub fn new(clinic: Clinic, key: TokenKey) -> Self {
        Self {
            clinic: Arc::new(clinic),
            key,
            outbox_wake: Arc::new(Notify::new()),
        }
    }
}
