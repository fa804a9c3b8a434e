//! Master/worker call dispatch.
//!
//! The [`Master`] owns all dispatch state and is driven by one writer. Time is
//! passed in explicitly so the same code runs under a wall clock in the
//! gateway and under simulated time in [`harness`].

pub mod harness;
mod master;
mod protocol;

pub use master::{Assignment, FleetError, Master, WorkerInfo, WorkerStatus};
pub use protocol::FleetMessage;
