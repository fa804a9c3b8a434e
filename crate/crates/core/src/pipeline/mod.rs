//! The per-call conversation loop: chunking, sentinel scanning, the turn
//! engine and the simulated-time driver.

mod chunker;
mod engine;
mod runner;

pub use chunker::{SentinelScanner, TextChunker};
pub use engine::{
    Action, AudioChunk, BargeInPolicy, EngineError, TimerKind, TurnEngine, TurnEvent, TurnState,
};
pub use runner::{
    adapters_with_callee, mock_adapters, mock_adapters_shared, run_call, secrets_for,
    simulate_call, CallError,
};
