//! Annotation service for the two human evaluation tasks: error
//! identification (task 1) and Likert rating (task 2).
//!
//! State lives in an append-only JSONL log replayed at startup. Units are
//! assigned round-robin with a fixed redundancy, annotators must pass a
//! manually reviewed qualification set before working on a task, and
//! exports are byte-deterministic analysis-schema JSONL.

pub mod config;
mod http;
pub mod model;
mod service;
mod store;

pub use config::{Config, ConfigError};
pub use http::{router, serve};
pub use model::{AnnotationTask, Assignment, AssignmentState, LogEntry, Queue, Session, SessionTask, UnitRef};
pub use service::{
    validate_payload, Clock, ItemPayload, ManualClock, NextResponse, Progress, ReviewReport, ReviewRequest,
    Service, ServiceError, SessionRequest, SubmitAck, SubmitRequest, SystemClock, Widgets,
};
pub use store::{Log, StoreError};
