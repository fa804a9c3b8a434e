//! Simulation engine for authorized voice-phishing awareness exercises.
//!
//! A call is driven by a sans-IO turn engine over simulated time, with mock
//! telephony, speech and language adapters. Finished calls are metered,
//! classified and aggregated into campaign reports.

// Validation uses `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapters;
pub mod analytics;
pub mod campaign;
pub mod config;
pub mod domain;
pub mod error;
pub mod events;
pub mod fleet;
pub mod log;
pub mod metering;
pub mod pipeline;
pub mod prompt;
pub mod text;

pub use config::Config;
pub use domain::{CallRecord, CallRequest, OutcomeClass, Scenario};
