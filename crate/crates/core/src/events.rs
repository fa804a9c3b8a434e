//! Progress events published while a call runs.

use serde::{Deserialize, Serialize};

use crate::domain::{EntryKind, Millis, OutcomeClass, Speaker, UsageCounters};
use crate::pipeline::TurnState;

/// One frame on the event stream. Field names are part of the wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireEvent {
    State {
        call_id: String,
        t_ms: Millis,
        state: TurnState,
    },
    Transcript {
        call_id: String,
        t_ms: Millis,
        speaker: Speaker,
        text: String,
        kind: EntryKind,
        /// Spoken length of a bot utterance.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        playback_ms: Option<Millis>,
    },
    Delay {
        call_id: String,
        t_ms: Millis,
        stt_ms: Millis,
        llm_ms: Millis,
        tts_ms: Millis,
        total_ms: Millis,
    },
    Usage {
        call_id: String,
        t_ms: Millis,
        usage: UsageCounters,
    },
    Outcome {
        call_id: String,
        t_ms: Millis,
        class: OutcomeClass,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        evidence: Option<usize>,
    },
    Error {
        call_id: String,
        t_ms: Millis,
        message: String,
    },
}

impl WireEvent {
    pub fn call_id(&self) -> &str {
        match self {
            WireEvent::State { call_id, .. }
            | WireEvent::Transcript { call_id, .. }
            | WireEvent::Delay { call_id, .. }
            | WireEvent::Usage { call_id, .. }
            | WireEvent::Outcome { call_id, .. }
            | WireEvent::Error { call_id, .. } => call_id,
        }
    }

    pub fn t_ms(&self) -> Millis {
        match self {
            WireEvent::State { t_ms, .. }
            | WireEvent::Transcript { t_ms, .. }
            | WireEvent::Delay { t_ms, .. }
            | WireEvent::Usage { t_ms, .. }
            | WireEvent::Outcome { t_ms, .. }
            | WireEvent::Error { t_ms, .. } => *t_ms,
        }
    }

    pub fn is_outcome(&self) -> bool {
        matches!(self, WireEvent::Outcome { .. })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

/// Receives events from a running call.
pub trait EventSink {
    fn emit(&mut self, event: WireEvent);
}

impl<F: FnMut(WireEvent)> EventSink for F {
    fn emit(&mut self, event: WireEvent) {
        self(event)
    }
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl EventSink for NullSink {
    fn emit(&mut self, _event: WireEvent) {}
}
