//! HTTP service for the reminiscence therapy clinic: JSON API, bearer-token
//! auth, the email outbox worker and the operator CLI.

pub mod app;
pub mod auth;
pub mod calendar;
pub mod cli;
pub mod config;
pub mod demo;
pub mod error;
pub mod extract;
pub mod handlers;
pub mod outbox;
pub mod routes;

pub use app::AppState;
