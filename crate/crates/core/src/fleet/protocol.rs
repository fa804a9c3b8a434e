//! Master/worker messages, one JSON object per frame.

use serde::{Deserialize, Serialize};

use super::master::{FleetError, Master};
use crate::domain::{CallRecord, CallRequest, Millis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FleetMessage {
    Register {
        line_id: String,
    },
    /// Master's answer to `REGISTER`.
    Registered {
        worker_id: String,
    },
    Heartbeat {
        worker_id: String,
    },
    Assign {
        call_request: CallRequest,
    },
    Done {
        call_record: Box<CallRecord>,
    },
}

impl FleetMessage {
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }

    pub fn decode(frame: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(frame)
    }
}

impl Master {
    /// Applies a worker-originated message and returns the reply, if any.
    pub fn handle(
        &mut self,
        message: FleetMessage,
        now: Millis,
    ) -> Result<Option<FleetMessage>, FleetError> {
        match message {
            FleetMessage::Register { line_id } => {
                let info = self.register_worker(&line_id, now)?;
                Ok(Some(FleetMessage::Registered { worker_id: info.id }))
            }
            FleetMessage::Heartbeat { worker_id } => {
                self.heartbeat(&worker_id, now)?;
                Ok(None)
            }
            FleetMessage::Done { call_record } => {
                let worker = self.complete_by_call(*call_record)?;
                self.heartbeat(&worker, now)?;
                Ok(None)
            }
            // Master-originated messages are not valid input.
            FleetMessage::Registered { .. } | FleetMessage::Assign { .. } => Ok(None),
        }
    }
}
