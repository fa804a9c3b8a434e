//! Network front end and command line for the simulator.

pub mod cli;
pub mod runtime;
pub mod server;
