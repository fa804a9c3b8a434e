//! Outcome classification, per-level success statistics and latency summaries.

mod outcome;
pub mod special;
mod stats;
mod summary;

pub use outcome::{annotate, classify_outcome};
pub use stats::{
    chi_squared, gradient, log_likelihood, logistic_fit, mann_whitney_u, midranks, pearson,
    quantile, spearman_rho, ChiSquared, ContingencyTable, LogisticFit, MannWhitney, StatsError,
};
pub use summary::{
    delay_summary, playback_summary, success_table, DelaySummary, OutcomeReport, PlaybackSummary,
    LEVELS,
};
