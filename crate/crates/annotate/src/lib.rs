//! Expert annotation study service.
//!
//! Experts classify one fold of spectrograms against a fixed exemplar grid.
//! Each session is an append-only JSONL event log under the sessions
//! directory, replayed on startup, so a restart loses no recorded answer.
//!
//! Ground truth stays server-side until finalize: item payloads carry only
//! opaque image aliases, and the session log is the only place item
//! metadata is written.
//!
//! The API has no authentication. Session ids are random 128-bit tokens,
//! which is adequate only on a trusted lab network.

pub mod api;
pub mod error;
pub mod report;
pub mod session;
pub mod store;
pub mod study;

pub use api::{router, serve};
pub use error::{AnnotateError, Result};
pub use report::study_summary;
pub use session::{load_sessions, Session, SessionState};
pub use store::Store;
pub use study::{load_or_create_salt, Study};
