//! Generation harness for building text corpora from chat-completion
//! endpoints.
//!
//! A [`GenerationJob`] sweeps one model over prompt items and temperatures.
//! Each request carries a single user message and a temperature; everything
//! else is left at the provider's defaults. Outcomes are appended to a JSONL
//! file that [`corpus_from_records`] turns back into analyzable text.

mod client;
mod error;
pub mod items;
mod job;
mod record;

pub use client::{run_job, run_job_with, RunSummary};
pub use error::{Error, Result};
pub use job::{
    plan, request_body, validate_template, Backoff, GenerationJob, PlannedRequest, DEFAULT_API_KEY_ENV,
    DEFAULT_TEMPERATURES, PLACEHOLDER,
};
pub use record::{
    completed_keys, corpus_from_records, read_records, GenerationRecord, RecordFilter, RecordKey, TokenUsage,
};
