//! Contracts for the four external services and their deterministic mocks.
//!
//! The call driver only sees the traits below. Mock implementations run on
//! simulated time: instead of blocking they report how long each step would
//! have taken, and the driver schedules the resulting events.

mod latency;
pub mod live;
mod llm;
mod mock;
mod victim;

use thiserror::Error;

pub use latency::{timing_synthesize, LatencyModel, LogNormal, SynthTiming};
pub use llm::ScriptedLlm;
pub use mock::{
    Callee, ChannelVictim, MockRecognizer, MockSynthesizer, MockTransport, TransportState,
    VictimInput,
};
pub use victim::{
    classify_bot_utterance, decide_disposition, scripted_victim_respond, wrong_value, BotIntent,
    DialogueRule, DialogueRules, FailureMix, ScriptedVictim, VictimPolicy, VictimTurn,
};

use crate::domain::Millis;
use crate::pipeline::AudioChunk;
use crate::prompt::Message;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdapterError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("recognizer: {0}")]
    Recognizer(String),
    #[error("language model: {0}")]
    LanguageModel(String),
    #[error("synthesizer: {0}")]
    Synthesizer(String),
    #[error("{0} is not available in this build")]
    Unavailable(&'static str),
}

/// What the transport heard after listening started.
#[derive(Debug, Clone, PartialEq)]
pub enum VictimSignal {
    Speech {
        text: String,
        /// Pause before the victim starts talking.
        starts_after_ms: Millis,
        duration_ms: Millis,
    },
    Silence,
    Hangup {
        after_ms: Millis,
    },
}

/// Telephony leg: dialing, media out, media in.
pub trait Transport: Send {
    fn dial(&mut self, phone: &str) -> Result<(), AdapterError>;
    fn play(&mut self, chunk: &AudioChunk) -> Result<(), AdapterError>;
    /// Waits for the victim's next move. Mocks answer immediately and describe
    /// the timing; interactive transports may block on a person.
    fn capture(&mut self) -> Result<VictimSignal, AdapterError>;
    fn hangup(&mut self) -> Result<(), AdapterError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcription {
    pub text: String,
    pub audio_s: f64,
    /// Endpointing plus finalization time after speech stops.
    pub finalize_ms: Millis,
}

/// Streaming speech recognizer with endpointing. One final per listening window.
pub trait Recognizer: Send {
    fn start_listening(&mut self) -> Result<(), AdapterError>;
    fn feed(&mut self, text: &str, duration_ms: Millis) -> Result<Transcription, AdapterError>;
    fn stop_listening(&mut self);
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamedToken {
    pub text: String,
    /// Offset from the request.
    pub at_ms: Millis,
}

/// A finished completion stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenStream {
    pub tokens: Vec<StreamedToken>,
    pub done_at_ms: Millis,
    pub in_tokens: u64,
    pub out_tokens: u64,
}

pub trait LanguageModel: Send {
    fn stream_complete(&mut self, messages: &[Message]) -> Result<TokenStream, AdapterError>;
}

/// One synthesized chunk and when it becomes playable.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedChunk {
    pub chunk: AudioChunk,
    pub ready_at: Millis,
}

/// FIFO streaming synthesizer: chunks come out in the order words go in.
pub trait Synthesizer: Send {
    fn push_word(&mut self, word: &str, now: Millis) -> Result<SynthesizedChunk, AdapterError>;
    /// Marks the end of an utterance; the next word pays first-chunk latency again.
    fn end_utterance(&mut self);
}

/// The four adapters a call needs.
pub struct Adapters {
    pub transport: Box<dyn Transport>,
    pub recognizer: Box<dyn Recognizer>,
    pub llm: Box<dyn LanguageModel>,
    pub synthesizer: Box<dyn Synthesizer>,
}
