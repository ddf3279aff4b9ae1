//! Core of the LeafTutor service: course materials are chunked, embedded and
//! indexed per assignment, student questions are answered from a budgeted
//! prompt built around retrieved chunks, and student code is compiled and
//! run in a bounded sandbox.

pub mod api;
pub mod auth;
pub mod config;
pub mod domain;
pub mod error;
pub mod id;
pub mod ingestion;
pub mod locks;
pub mod retrieval;
pub mod sandbox;
pub mod service;
pub mod store;
pub mod tutor;

pub use auth::{AuthToken, Principal, PrincipalRole};
pub use config::Config;
pub use domain::*;
pub use error::{Error, Result};
pub use id::Id;
pub use service::{EventPage, MaterialUpload, RunRequest, ServiceSettings, Transcript, TutorService};
