use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CallRecord, CallRequest, Millis};
use crate::log::{LogError, RecordSink};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "call_id", rename_all = "snake_case")]
pub enum WorkerStatus {
    Idle,
    Busy(String),
    Offline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerInfo {
    pub id: String,
    pub line_id: String,
    pub status: WorkerStatus,
    pub last_heartbeat: Millis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub worker_id: String,
    pub request: CallRequest,
}

#[derive(Debug, Error)]
pub enum FleetError {
    #[error("line {0} is already registered")]
    DuplicateLine(String),
    #[error("unknown worker {0}")]
    UnknownWorker(String),
    #[error("call id {0} was already submitted")]
    DuplicateCall(String),
    #[error("worker {0} is not busy")]
    NotBusy(String),
    #[error("worker {worker} is busy with {busy_with}, not {call}")]
    WrongCall {
        worker: String,
        busy_with: String,
        call: String,
    },
    #[error("no worker holds call {0}")]
    NotInflight(String),
    #[error(transparent)]
    Persist(#[from] LogError),
}

/// Single-writer owner of the worker registry and dispatch queue.
pub struct Master {
    workers: BTreeMap<String, WorkerInfo>,
    lines: BTreeSet<String>,
    pending: VecDeque<CallRequest>,
    /// call id → (worker id, request)
    inflight: BTreeMap<String, (String, CallRequest)>,
    known_calls: BTreeSet<String>,
    poll_interval_ms: Millis,
    offline_after_polls: u32,
    next_worker: u64,
    requeued: u64,
    completed: u64,
    sink: Box<dyn RecordSink>,
}

impl Master {
    pub fn new(
        poll_interval_ms: Millis,
        offline_after_polls: u32,
        sink: Box<dyn RecordSink>,
    ) -> Self {
        Self {
            workers: BTreeMap::new(),
            lines: BTreeSet::new(),
            pending: VecDeque::new(),
            inflight: BTreeMap::new(),
            known_calls: BTreeSet::new(),
            poll_interval_ms,
            offline_after_polls,
            next_worker: 0,
            requeued: 0,
            completed: 0,
            sink,
        }
    }

    pub fn register_worker(
        &mut self,
        line_id: &str,
        now: Millis,
    ) -> Result<WorkerInfo, FleetError> {
        if !self.lines.insert(line_id.to_string()) {
            return Err(FleetError::DuplicateLine(line_id.to_string()));
        }
        self.next_worker += 1;
        let info = WorkerInfo {
            id: format!("w{:04}", self.next_worker),
            line_id: line_id.to_string(),
            status: WorkerStatus::Idle,
            last_heartbeat: now,
        };
        self.workers.insert(info.id.clone(), info.clone());
        Ok(info)
    }

    /// Records liveness. An offline worker that reports back becomes idle.
    pub fn heartbeat(&mut self, worker_id: &str, now: Millis) -> Result<(), FleetError> {
        let w = self
            .workers
            .get_mut(worker_id)
            .ok_or_else(|| FleetError::UnknownWorker(worker_id.to_string()))?;
        w.last_heartbeat = now;
        if w.status == WorkerStatus::Offline {
            w.status = WorkerStatus::Idle;
        }
        Ok(())
    }

    pub fn enqueue(&mut self, request: CallRequest) -> Result<(), FleetError> {
        if !self.known_calls.insert(request.id.clone()) {
            return Err(FleetError::DuplicateCall(request.id));
        }
        self.pending.push_back(request);
        Ok(())
    }

    /// Marks silent workers offline (requeueing their calls at the head) and
    /// hands pending calls to idle workers in FIFO order.
    pub fn poll_and_dispatch(&mut self, now: Millis) -> Vec<Assignment> {
        let limit = self.poll_interval_ms * Millis::from(self.offline_after_polls);
        let mut lost = Vec::new();
        for w in self.workers.values_mut() {
            if w.status != WorkerStatus::Offline && now.saturating_sub(w.last_heartbeat) > limit {
                if let WorkerStatus::Busy(call) = &w.status {
                    lost.push(call.clone());
                }
                w.status = WorkerStatus::Offline;
            }
        }
        // Requeue in reverse so the earliest lost call ends up first.
        for call in lost.iter().rev() {
            let request = self.take_inflight(call);
            self.pending.push_front(request);
            self.requeued += 1;
        }

        let mut out = Vec::new();
        for w in self.workers.values_mut() {
            if w.status != WorkerStatus::Idle {
                continue;
            }
            let Some(request) = self.pending.pop_front() else {
                break;
            };
            w.status = WorkerStatus::Busy(request.id.clone());
            self.inflight
                .insert(request.id.clone(), (w.id.clone(), request.clone()));
            out.push(Assignment {
                worker_id: w.id.clone(),
                request,
            });
        }
        out
    }

    fn take_inflight(&mut self, call: &str) -> CallRequest {
        self.inflight
            .remove(call)
            .expect("busy worker's call is inflight")
            .1
    }

    pub fn complete_call(&mut self, worker_id: &str, record: CallRecord) -> Result<(), FleetError> {
        let w = self
            .workers
            .get_mut(worker_id)
            .ok_or_else(|| FleetError::UnknownWorker(worker_id.to_string()))?;
        match &w.status {
            WorkerStatus::Busy(call) if *call == record.request.id => {}
            WorkerStatus::Busy(call) => {
                return Err(FleetError::WrongCall {
                    worker: worker_id.to_string(),
                    busy_with: call.clone(),
                    call: record.request.id.clone(),
                })
            }
            _ => return Err(FleetError::NotBusy(worker_id.to_string())),
        }
        self.sink.persist(&record)?;
        w.status = WorkerStatus::Idle;
        self.inflight.remove(&record.request.id);
        self.completed += 1;
        Ok(())
    }

    /// Completes whichever worker holds the record's call.
    pub fn complete_by_call(&mut self, record: CallRecord) -> Result<String, FleetError> {
        let worker = self
            .inflight
            .get(&record.request.id)
            .map(|(w, _)| w.clone())
            .ok_or_else(|| FleetError::NotInflight(record.request.id.clone()))?;
        self.complete_call(&worker, record)?;
        Ok(worker)
    }

    pub fn workers(&self) -> impl Iterator<Item = &WorkerInfo> {
        self.workers.values()
    }

    pub fn worker(&self, id: &str) -> Option<&WorkerInfo> {
        self.workers.get(id)
    }

    pub fn pending(&self) -> impl Iterator<Item = &CallRequest> {
        self.pending.iter()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// `(call id, worker id)` pairs currently running.
    pub fn inflight(&self) -> impl Iterator<Item = (&str, &str)> {
        self.inflight
            .iter()
            .map(|(c, (w, _))| (c.as_str(), w.as_str()))
    }

    pub fn inflight_len(&self) -> usize {
        self.inflight.len()
    }

    pub fn requeued(&self) -> u64 {
        self.requeued
    }

    pub fn completed(&self) -> u64 {
        self.completed
    }

    /// Nothing pending and nothing running.
    pub fn is_drained(&self) -> bool {
        self.pending.is_empty() && self.inflight.is_empty()
    }
}
