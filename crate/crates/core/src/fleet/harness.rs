//! Simulated-time fleet run with random call lengths and worker crashes.
//!
//! The harness plays the workers: it heartbeats for live ones, runs assigned
//! calls for a random duration, and kills chosen workers in the middle of a
//! call. It keeps its own bookkeeping of who is doing what so that the
//! master's decisions can be checked against it.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Master;
use crate::domain::{
    CallRecord, CallRequest, EntryKind, Millis, OutcomeClass, OutcomeRecord, Speaker,
    TranscriptEntry, UsageCounters, VictimProfile,
};
use crate::log::MemorySink;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub workers: usize,
    pub requests: usize,
    pub crashes: usize,
    pub seed: u64,
    pub poll_interval_ms: Millis,
    pub offline_after_polls: u32,
    /// Requests arrive uniformly in `[0, arrival_window_ms)`.
    pub arrival_window_ms: Millis,
    pub max_call_ms: Millis,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            workers: 10,
            requests: 100,
            crashes: 2,
            seed: 1,
            poll_interval_ms: 1000,
            offline_after_polls: 3,
            arrival_window_ms: 30_000,
            max_call_ms: 60_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    /// Accepted completions per call id.
    pub completions: BTreeMap<String, usize>,
    pub enqueue_order: Vec<String>,
    /// Order in which calls were first handed to a worker.
    pub first_dispatch_order: Vec<String>,
    /// Assignments made to a worker that was still running another call.
    pub double_bookings: usize,
    pub crashed_workers: Vec<String>,
    pub requeued: u64,
    pub finished_at: Millis,
    pub max_busy_workers: usize,
}

impl HarnessReport {
    pub fn all_served_exactly_once(&self) -> bool {
        self.completions.len() == self.enqueue_order.len()
            && self.completions.values().all(|&n| n == 1)
    }

    pub fn fifo(&self) -> bool {
        self.first_dispatch_order == self.enqueue_order
    }
}

/// A minimal well-formed record for a call that lasted `duration_ms`.
pub fn placeholder_record(request: &CallRequest, duration_ms: Millis) -> CallRecord {
    CallRecord {
        request: request.clone(),
        prompt: String::new(),
        transcript: vec![TranscriptEntry {
            t_ms: duration_ms,
            speaker: Speaker::Victim,
            text: "victim hung up".into(),
            kind: EntryKind::Hangup,
        }],
        usage: UsageCounters {
            call_duration_s: duration_ms as f64 / 1000.0,
            ..UsageCounters::default()
        },
        outcome: OutcomeRecord {
            class: OutcomeClass::Refused,
            evidence: None,
            annotated: false,
        },
        started_at: 0,
        ended_at: duration_ms,
        delays_ms: vec![],
        delay_breakdown: vec![],
        playback_ms: vec![],
    }
}

fn request(i: usize) -> CallRequest {
    CallRequest {
        id: format!("req-{i:04}"),
        persona_id: "michael".into(),
        victim: VictimProfile {
            name: format!("Participant {i}"),
            phone: format!("sim:{i}"),
            discretion_level: (i % 4) as u8 + 1,
        },
        scenario_id: "innovatech".into(),
        max_duration_s: 600,
        seed: i as u64,
        disposition: None,
    }
}

struct Running {
    call: String,
    request: CallRequest,
    started: Millis,
    ends: Millis,
    /// The worker dies at this time instead of finishing.
    crash_at: Option<Millis>,
}

pub fn run(config: &HarnessConfig) -> HarnessReport {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut master = Master::new(
        config.poll_interval_ms,
        config.offline_after_polls,
        Box::new(MemorySink::default()),
    );
    let ids: Vec<String> = (0..config.workers)
        .map(|i| {
            master
                .register_worker(&format!("sim:{}", i + 1), 0)
                .expect("distinct lines")
                .id
        })
        .collect();
    // Each chosen worker dies halfway through its second call.
    let doomed: BTreeSet<String> = sample(&mut rng, ids.len(), config.crashes.min(ids.len()))
        .into_iter()
        .map(|i| ids[i].clone())
        .collect();
    let mut calls_started: BTreeMap<String, usize> = BTreeMap::new();

    let mut arrivals: Vec<(Millis, CallRequest)> = (0..config.requests)
        .map(|i| {
            (
                rng.random_range(0..config.arrival_window_ms.max(1)),
                request(i),
            )
        })
        .collect();
    arrivals.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    let mut arrivals = arrivals.into_iter().peekable();

    let mut report = HarnessReport::default();
    let mut running: BTreeMap<String, Running> = BTreeMap::new();
    let mut dead: BTreeSet<String> = BTreeSet::new();
    let mut dispatched: BTreeSet<String> = BTreeSet::new();
    let mut now: Millis;
    let mut next_poll: Millis = 0;
    let horizon = config.max_call_ms * (config.requests as Millis + 10) + config.arrival_window_ms;

    loop {
        let next_end = running
            .values()
            .map(|r| r.crash_at.unwrap_or(r.ends))
            .min()
            .unwrap_or(Millis::MAX);
        let next_arrival = arrivals.peek().map_or(Millis::MAX, |a| a.0);
        now = next_poll.min(next_end).min(next_arrival);
        if now > horizon {
            break;
        }

        // Everything due now, in random order, so completions race with polls.
        let mut due: Vec<u8> = Vec::new();
        if next_arrival == now {
            due.push(0);
        }
        if next_end == now {
            due.push(1);
        }
        if next_poll == now {
            due.push(2);
        }
        if rng.random_bool(0.5) {
            due.reverse();
        }
        for kind in due {
            match kind {
                0 => {
                    while arrivals.peek().is_some_and(|a| a.0 == now) {
                        let (_, req) = arrivals.next().expect("peeked");
                        report.enqueue_order.push(req.id.clone());
                        master.enqueue(req).expect("unique ids");
                    }
                }
                1 => {
                    let finished: Vec<String> = running
                        .iter()
                        .filter(|(_, r)| r.crash_at.unwrap_or(r.ends) == now)
                        .map(|(w, _)| w.clone())
                        .collect();
                    for worker in finished {
                        let r = running.remove(&worker).expect("running");
                        if r.crash_at.is_some() {
                            dead.insert(worker.clone());
                            report.crashed_workers.push(worker);
                            continue;
                        }
                        let record = placeholder_record(&r.request, r.ends - r.started);
                        if master.complete_call(&worker, record).is_ok() {
                            *report.completions.entry(r.call).or_default() += 1;
                        }
                    }
                }
                _ => {
                    for w in &ids {
                        if !dead.contains(w) {
                            master.heartbeat(w, now).expect("registered");
                        }
                    }
                    for a in master.poll_and_dispatch(now) {
                        if running.contains_key(&a.worker_id) || dead.contains(&a.worker_id) {
                            report.double_bookings += 1;
                            continue;
                        }
                        if dispatched.insert(a.request.id.clone()) {
                            report.first_dispatch_order.push(a.request.id.clone());
                        }
                        let n = calls_started.entry(a.worker_id.clone()).or_default();
                        *n += 1;
                        let duration = if rng.random_bool(0.5) {
                            // Land exactly on a poll tick.
                            config.poll_interval_ms
                                * rng.random_range(
                                    1..=(config.max_call_ms / config.poll_interval_ms).max(1),
                                )
                        } else {
                            rng.random_range(1..=config.max_call_ms)
                        };
                        let crash_at = (doomed.contains(&a.worker_id) && *n == 2)
                            .then(|| now + duration.div_ceil(2));
                        running.insert(
                            a.worker_id.clone(),
                            Running {
                                call: a.request.id.clone(),
                                request: a.request,
                                started: now,
                                ends: now + duration,
                                crash_at,
                            },
                        );
                    }
                    report.max_busy_workers = report.max_busy_workers.max(running.len());
                    next_poll += config.poll_interval_ms;
                }
            }
        }
        if arrivals.peek().is_none() && master.is_drained() && running.is_empty() {
            break;
        }
    }
    report.requeued = master.requeued();
    report.finished_at = now;
    report
}
