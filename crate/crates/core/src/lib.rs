//! Core of the reminiscence therapy service: the patient memory catalog,
//! therapy sessions and their reports, clinical assessments, life-story
//! composition, PDF documents and durable storage.
//!
//! Everything here is synchronous. The HTTP layer lives in the server crate
//! and calls into [`service::Clinic`].

pub mod catalog;
pub mod clock;
pub mod domain;
pub mod error;
pub mod ids;
pub mod life_story;
pub mod report;
pub mod service;
pub mod store;

pub use error::{Error, Result};
