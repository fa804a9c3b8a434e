//! Call store, the single-writer master task and in-process workers.

use std::collections::{BTreeMap, HashMap};
use std::sync::mpsc as std_mpsc;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use serde::Serialize;
use tokio::sync::{mpsc, oneshot, watch};
use vishsim::adapters::{ChannelVictim, VictimInput};
use vishsim::domain::{
    CallRecord, CallRequest, EntryKind, OutcomeClass, OutcomeRecord, Speaker, TranscriptEntry,
};
use vishsim::events::WireEvent;
use vishsim::fleet::{FleetError, FleetMessage, Master, WorkerInfo};
use vishsim::log::{LogError, RecordLog, RecordSink};
use vishsim::pipeline::{adapters_with_callee, mock_adapters, run_call};
use vishsim::Config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CallStatus {
    Queued,
    Running,
    Done,
}

pub struct CallEntry {
    pub request: CallRequest,
    pub campaign: Option<String>,
    pub interactive: bool,
    pub status: CallStatus,
    pub events: Vec<WireEvent>,
    pub record: Option<CallRecord>,
    /// Bumped on every new event so streams can wake up.
    pub changed: watch::Sender<usize>,
    victim_tx: Option<std_mpsc::Sender<VictimInput>>,
    victim_rx: Option<std_mpsc::Receiver<VictimInput>>,
    victim_attached: bool,
}

/// Everything the HTTP side reads. Workers write events into it.
#[derive(Default)]
pub struct Store {
    calls: Mutex<HashMap<String, CallEntry>>,
    campaigns: Mutex<BTreeMap<String, Vec<String>>>,
}

pub enum AttachError {
    Unknown,
    NotInteractive,
    AlreadyAttached,
}

impl Store {
    pub fn calls(&self) -> MutexGuard<'_, HashMap<String, CallEntry>> {
        self.calls.lock().expect("store lock")
    }

    pub fn campaign(&self, id: &str) -> Option<Vec<String>> {
        self.campaigns.lock().expect("store lock").get(id).cloned()
    }

    pub fn contains(&self, call_id: &str) -> bool {
        self.calls().contains_key(call_id)
    }

    fn insert(&self, request: CallRequest, campaign: Option<&str>, interactive: bool) {
        let (victim_tx, victim_rx) = if interactive {
            let (tx, rx) = std_mpsc::channel();
            (Some(tx), Some(rx))
        } else {
            (None, None)
        };
        let entry = CallEntry {
            request: request.clone(),
            campaign: campaign.map(str::to_string),
            interactive,
            status: CallStatus::Queued,
            events: Vec::new(),
            record: None,
            changed: watch::channel(0).0,
            victim_tx,
            victim_rx,
            victim_attached: false,
        };
        self.calls().insert(request.id, entry);
    }

    fn set_status(&self, call_id: &str, status: CallStatus) {
        if let Some(e) = self.calls().get_mut(call_id) {
            e.status = status;
        }
    }

    fn push_event(&self, call_id: &str, event: WireEvent) {
        if let Some(e) = self.calls().get_mut(call_id) {
            e.events.push(event);
            e.changed.send_replace(e.events.len());
        }
    }

    fn finish(&self, record: &CallRecord) {
        if let Some(e) = self.calls().get_mut(&record.request.id) {
            e.record = Some(record.clone());
            e.status = CallStatus::Done;
            e.changed.send_replace(e.events.len());
        }
    }

    fn take_victim_rx(&self, call_id: &str) -> Option<std_mpsc::Receiver<VictimInput>> {
        self.calls()
            .get_mut(call_id)
            .and_then(|e| e.victim_rx.take())
    }

    /// Hands out the sending half of an interactive call's victim channel.
    pub fn attach_victim(
        &self,
        call_id: &str,
    ) -> Result<std_mpsc::Sender<VictimInput>, AttachError> {
        let mut calls = self.calls();
        let entry = calls.get_mut(call_id).ok_or(AttachError::Unknown)?;
        if !entry.interactive {
            return Err(AttachError::NotInteractive);
        }
        if entry.victim_attached || entry.status == CallStatus::Done {
            return Err(AttachError::AlreadyAttached);
        }
        entry.victim_attached = true;
        Ok(entry
            .victim_tx
            .clone()
            .expect("interactive calls have a channel"))
    }

    /// Records of finished calls in a campaign, in submission order.
    pub fn campaign_records(&self, id: &str) -> Option<(usize, Vec<CallRecord>)> {
        let ids = self.campaign(id)?;
        let calls = self.calls();
        let records = ids
            .iter()
            .filter_map(|c| calls.get(c).and_then(|e| e.record.clone()))
            .collect();
        Some((ids.len(), records))
    }
}

/// Persists finished records to the store and, optionally, a log file.
struct StoreSink {
    store: Arc<Store>,
    log: Option<RecordLog>,
}

impl RecordSink for StoreSink {
    fn persist(&mut self, record: &CallRecord) -> Result<(), LogError> {
        if let Some(log) = &mut self.log {
            log.append(record)?;
        }
        self.store.finish(record);
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FleetStatus {
    pub workers: Vec<WorkerInfo>,
    pub pending: usize,
    pub inflight: usize,
    pub completed: u64,
    pub requeued: u64,
    /// Largest number of calls that were running at the same time.
    pub peak_inflight: usize,
}

pub enum Command {
    Submit {
        requests: Vec<CallRequest>,
        campaign: Option<String>,
        interactive: bool,
        reply: oneshot::Sender<Result<(), FleetError>>,
    },
    Fleet(FleetMessage),
    Status(oneshot::Sender<FleetStatus>),
}

#[derive(Debug, Clone)]
pub struct RuntimeOptions {
    pub workers: usize,
    pub poll_interval: Duration,
    pub offline_after_polls: u32,
    /// How long an interactive call waits for the human to say something.
    pub victim_wait: Duration,
}

impl RuntimeOptions {
    pub fn from_config(config: &Config) -> Self {
        Self {
            workers: config.fleet.workers,
            poll_interval: Duration::from_millis(config.fleet.poll_interval_ms),
            offline_after_polls: config.fleet.offline_after_polls,
            victim_wait: Duration::from_secs(120),
        }
    }
}

/// Handle to the running fleet.
#[derive(Clone)]
pub struct Runtime {
    pub store: Arc<Store>,
    pub config: Arc<Config>,
    commands: mpsc::Sender<Command>,
}

impl Runtime {
    pub fn start(config: Config, options: RuntimeOptions, log: Option<RecordLog>) -> Self {
        let store = Arc::new(Store::default());
        let config = Arc::new(config);
        let (tx, rx) = mpsc::channel(256);
        let sink = StoreSink {
            store: store.clone(),
            log,
        };
        let master = Master::new(
            options.poll_interval.as_millis() as u64,
            options.offline_after_polls,
            Box::new(sink),
        );
        tokio::spawn(master_task(
            master,
            rx,
            tx.clone(),
            store.clone(),
            config.clone(),
            options,
        ));
        Self {
            store,
            config,
            commands: tx,
        }
    }

    /// Queues calls. All ids must be new; nothing is queued otherwise.
    pub async fn submit(
        &self,
        requests: Vec<CallRequest>,
        campaign: Option<String>,
        interactive: bool,
    ) -> Result<(), FleetError> {
        let (reply, rx) = oneshot::channel();
        self.commands
            .send(Command::Submit {
                requests,
                campaign,
                interactive,
                reply,
            })
            .await
            .expect("master task is running");
        rx.await.expect("master replies")
    }

    pub async fn status(&self) -> FleetStatus {
        let (reply, rx) = oneshot::channel();
        self.commands
            .send(Command::Status(reply))
            .await
            .expect("master task is running");
        rx.await.expect("master replies")
    }
}

async fn master_task(
    mut master: Master,
    mut commands: mpsc::Receiver<Command>,
    to_master: mpsc::Sender<Command>,
    store: Arc<Store>,
    config: Arc<Config>,
    options: RuntimeOptions,
) {
    let epoch = Instant::now();
    let now = || epoch.elapsed().as_millis() as u64;
    let mut workers: HashMap<String, mpsc::Sender<FleetMessage>> = HashMap::new();
    for i in 1..=options.workers {
        let reply = master.handle(
            FleetMessage::Register {
                line_id: format!("sim:{i}"),
            },
            now(),
        );
        let Ok(Some(FleetMessage::Registered { worker_id })) = reply else {
            unreachable!("fresh line ids register");
        };
        let (tx, rx) = mpsc::channel(1);
        workers.insert(worker_id.clone(), tx);
        tokio::spawn(worker_task(
            worker_id,
            rx,
            to_master.clone(),
            store.clone(),
            config.clone(),
            options.clone(),
        ));
    }

    let mut tick = tokio::time::interval(options.poll_interval);
    let mut peak = 0;
    loop {
        tokio::select! {
            command = commands.recv() => {
                let Some(command) = command else { break };
                match command {
                    Command::Submit { requests, campaign, interactive, reply } => {
                        let _ = reply.send(submit(&mut master, &store, requests, campaign, interactive));
                    }
                    Command::Fleet(message) => {
                        if let Err(e) = master.handle(message, now()) {
                            eprintln!("fleet: {e}");
                        }
                    }
                    Command::Status(reply) => {
                        let _ = reply.send(FleetStatus {
                            workers: master.workers().cloned().collect(),
                            pending: master.pending_len(),
                            inflight: master.inflight_len(),
                            completed: master.completed(),
                            requeued: master.requeued(),
                            peak_inflight: peak,
                        });
                    }
                }
            }
            _ = tick.tick() => {}
        }
        for a in master.poll_and_dispatch(now()) {
            store.set_status(&a.request.id, CallStatus::Running);
            let message = FleetMessage::Assign {
                call_request: a.request,
            };
            if workers[&a.worker_id].try_send(message).is_err() {
                eprintln!("fleet: worker {} did not take its assignment", a.worker_id);
            }
        }
        peak = peak.max(master.inflight_len());
    }
}

fn submit(
    master: &mut Master,
    store: &Store,
    requests: Vec<CallRequest>,
    campaign: Option<String>,
    interactive: bool,
) -> Result<(), FleetError> {
    let mut seen = std::collections::HashSet::new();
    for r in &requests {
        if store.contains(&r.id) || !seen.insert(r.id.as_str()) {
            return Err(FleetError::DuplicateCall(r.id.clone()));
        }
    }
    let ids: Vec<String> = requests.iter().map(|r| r.id.clone()).collect();
    for request in requests {
        store.insert(request.clone(), campaign.as_deref(), interactive);
        // The store and the master see the same ids, so this cannot collide.
        master.enqueue(request)?;
    }
    if let Some(c) = campaign {
        store.campaigns.lock().expect("store lock").insert(c, ids);
    }
    Ok(())
}

async fn worker_task(
    worker_id: String,
    mut assignments: mpsc::Receiver<FleetMessage>,
    to_master: mpsc::Sender<Command>,
    store: Arc<Store>,
    config: Arc<Config>,
    options: RuntimeOptions,
) {
    let heartbeat = || {
        Command::Fleet(FleetMessage::Heartbeat {
            worker_id: worker_id.clone(),
        })
    };
    let mut tick = tokio::time::interval(options.poll_interval);
    loop {
        let message = tokio::select! {
            m = assignments.recv() => m,
            _ = tick.tick() => {
                if to_master.send(heartbeat()).await.is_err() { return; }
                continue;
            }
        };
        let Some(FleetMessage::Assign { call_request }) = message else {
            return;
        };
        let (store2, config2, wait) = (store.clone(), config.clone(), options.victim_wait);
        let mut call =
            tokio::task::spawn_blocking(move || execute(&config2, &store2, &call_request, wait));
        let record = loop {
            tokio::select! {
                done = &mut call => break done.expect("call thread"),
                _ = tick.tick() => {
                    if to_master.send(heartbeat()).await.is_err() { return; }
                }
            }
        };
        let done = Command::Fleet(FleetMessage::Done {
            call_record: Box::new(record),
        });
        if to_master.send(done).await.is_err() {
            return;
        }
    }
}

/// Runs one call on mock adapters, or against a human for interactive calls.
fn execute(
    config: &Config,
    store: &Arc<Store>,
    request: &CallRequest,
    wait: Duration,
) -> CallRecord {
    let adapters = match store.take_victim_rx(&request.id) {
        Some(rx) => adapters_with_callee(config, request, Box::new(ChannelVictim::new(rx, wait))),
        None => mock_adapters(config, request),
    };
    let id = request.id.clone();
    let mut sink = |e: WireEvent| store.push_event(&id, e);
    let result =
        adapters.and_then(|a| run_call(request, &config.scenario, &config.pipeline, a, &mut sink));
    result.unwrap_or_else(|e| failed_record(request, &e.to_string()))
}

fn failed_record(request: &CallRequest, message: &str) -> CallRecord {
    let entry = |text: &str, kind| TranscriptEntry {
        t_ms: 0,
        speaker: Speaker::System,
        text: text.to_string(),
        kind,
    };
    CallRecord {
        request: request.clone(),
        prompt: String::new(),
        transcript: vec![
            entry(message, EntryKind::Error),
            entry("call aborted", EntryKind::Hangup),
        ],
        usage: Default::default(),
        outcome: OutcomeRecord {
            class: OutcomeClass::Bug,
            evidence: None,
            annotated: false,
        },
        started_at: 0,
        ended_at: 0,
        delays_ms: vec![],
        delay_breakdown: vec![],
        playback_ms: vec![],
    }
}
