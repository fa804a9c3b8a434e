//! Discrete-event driver that connects a [`TurnEngine`] to the adapters.
//!
//! Mock adapters report how long each step takes instead of sleeping, so the
//! driver keeps its own clock and a queue of future events. A ten-minute call
//! runs in well under a millisecond of wall time.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::engine::{Action, AudioChunk, TimerKind, TurnEngine, TurnEvent, TurnState};
use crate::adapters::{
    Adapters, Callee, MockRecognizer, MockSynthesizer, MockTransport, ScriptedLlm, ScriptedVictim,
    VictimSignal,
};
use crate::analytics::classify_outcome;
use crate::config::{Config, PipelineConfig};
use crate::domain::{
    CallRecord, CallRequest, EntryKind, Millis, OutcomeClass, OutcomeRecord, Scenario, Speaker,
    UsageCounters,
};
use crate::error::InvariantViolation;
use crate::events::{EventSink, WireEvent};
use crate::prompt::{render_prompt, PromptError};

#[derive(Debug, Error)]
pub enum CallError {
    #[error(transparent)]
    Invalid(#[from] InvariantViolation),
    #[error("unknown persona {0:?}")]
    UnknownPersona(String),
    #[error("request is for scenario {requested:?} but {loaded:?} is loaded")]
    ScenarioMismatch { requested: String, loaded: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// The secret values whose disclosure counts as success for this persona.
pub fn secrets_for(scenario: &Scenario, persona_id: &str) -> Vec<(String, String)> {
    scenario
        .persona(persona_id)
        .and_then(|p| p.goal_key())
        .and_then(|k| scenario.fact(k))
        .map(|f| vec![(f.key.clone(), f.value.clone())])
        .unwrap_or_default()
}

/// Per-adapter seeds derived from one request seed.
struct Seeds {
    transport: u64,
    recognizer: u64,
    llm: u64,
    synthesizer: u64,
    victim: u64,
}

impl Seeds {
    fn from(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            transport: rng.random(),
            recognizer: rng.random(),
            llm: rng.random(),
            synthesizer: rng.random(),
            victim: rng.random(),
        }
    }
}

/// Mock adapters around an arbitrary callee.
pub fn adapters_with_callee(
    config: &Config,
    request: &CallRequest,
    callee: Box<dyn Callee>,
) -> Result<Adapters, CallError> {
    let scenario = &config.scenario;
    let persona = scenario
        .persona(&request.persona_id)
        .ok_or_else(|| CallError::UnknownPersona(request.persona_id.clone()))?;
    let goal = persona
        .goal_key()
        .and_then(|k| scenario.fact(k))
        .map(|f| f.value.clone());
    let seeds = Seeds::from(request.seed);
    let latency = config.latency;
    Ok(Adapters {
        transport: Box::new(MockTransport::new(callee, latency, seeds.transport)),
        recognizer: Box::new(MockRecognizer::new(latency, seeds.recognizer)),
        llm: Box::new(
            ScriptedLlm::new(persona.clone(), goal, latency, seeds.llm)
                .with_persistence(config.pipeline.llm_persistence),
        ),
        synthesizer: Box::new(MockSynthesizer::new(latency, seeds.synthesizer)),
    })
}

/// Fully simulated adapters with a scripted victim.
pub fn mock_adapters(config: &Config, request: &CallRequest) -> Result<Adapters, CallError> {
    mock_adapters_shared(config, Arc::new(config.scenario.clone()), request)
}

/// Like [`mock_adapters`] but reuses an already shared scenario.
pub fn mock_adapters_shared(
    config: &Config,
    scenario: Arc<Scenario>,
    request: &CallRequest,
) -> Result<Adapters, CallError> {
    let seeds = Seeds::from(request.seed);
    let mut victim = ScriptedVictim::new(
        scenario,
        config.victim_policy.clone(),
        request.victim.discretion_level,
        request.victim.name.clone(),
        seeds.victim,
    )
    .with_disposition(request.disposition);
    if let Some(rules) = &config.dialogue {
        victim = victim.with_rules(rules.clone());
    }
    adapters_with_callee(config, request, Box::new(victim))
}

/// Runs one fully simulated call.
pub fn simulate_call(config: &Config, request: &CallRequest) -> Result<CallRecord, CallError> {
    let adapters = mock_adapters(config, request)?;
    run_call(
        request,
        &config.scenario,
        &config.pipeline,
        adapters,
        &mut crate::events::NullSink,
    )
}

#[derive(Debug)]
enum Pending {
    Engine(TurnEvent),
    Final {
        text: String,
        speech_ended_at: Millis,
        audio_s: f64,
    },
    PlaybackDone {
        turn: u64,
    },
}

/// Events ordered by time, ties broken by insertion order.
#[derive(Default)]
struct Agenda {
    heap: BinaryHeap<Reverse<(Millis, u64)>>,
    items: std::collections::HashMap<u64, Pending>,
    seq: u64,
}

impl Agenda {
    fn push(&mut self, at: Millis, item: Pending) {
        self.seq += 1;
        self.heap.push(Reverse((at, self.seq)));
        self.items.insert(self.seq, item);
    }

    fn pop(&mut self) -> Option<(Millis, Pending)> {
        let Reverse((at, seq)) = self.heap.pop()?;
        Some((at, self.items.remove(&seq).expect("scheduled item")))
    }
}

struct Driver<'a> {
    call_id: String,
    engine: TurnEngine,
    adapters: Adapters,
    agenda: Agenda,
    usage: UsageCounters,
    silence_ms: Millis,
    /// When the bot's queued audio finishes playing.
    playback_until: Millis,
    turn: u64,
    playback_scheduled: bool,
    sink: &'a mut dyn EventSink,
    emitted: usize,
    bot_entries_emitted: usize,
    last_state: Option<TurnState>,
}

impl Driver<'_> {
    fn fail(&mut self, now: Millis, message: String) {
        self.agenda
            .push(now, Pending::Engine(TurnEvent::AdapterFailed(message)));
    }

    fn execute(&mut self, action: Action, now: Millis) {
        match action {
            Action::SendToLlm(messages) => {
                self.turn += 1;
                self.playback_scheduled = false;
                self.adapters.synthesizer.end_utterance();
                match self.adapters.llm.stream_complete(&messages) {
                    Ok(stream) => {
                        self.usage.llm_in_tokens += stream.in_tokens;
                        self.usage.llm_out_tokens += stream.out_tokens;
                        for token in stream.tokens {
                            self.agenda.push(
                                now + token.at_ms,
                                Pending::Engine(TurnEvent::LlmToken(token.text)),
                            );
                        }
                        self.agenda
                            .push(now + stream.done_at_ms, Pending::Engine(TurnEvent::LlmDone));
                    }
                    Err(e) => self.fail(now, e.to_string()),
                }
            }
            Action::Synthesize(word) => match self.adapters.synthesizer.push_word(&word, now) {
                Ok(out) => {
                    self.usage.tts_chars += out.chunk.chars;
                    self.agenda.push(
                        out.ready_at,
                        Pending::Engine(TurnEvent::AudioChunkReady(out.chunk)),
                    );
                }
                Err(e) => self.fail(now, e.to_string()),
            },
            Action::Play(chunk) => self.play(chunk, now),
            Action::StartListening => self.listen(now),
            Action::StopListening => self.adapters.recognizer.stop_listening(),
            Action::Hangup => {
                self.adapters.recognizer.stop_listening();
                // A failing hangup still ends the call on our side.
                let _ = self.adapters.transport.hangup();
                self.agenda
                    .push(now, Pending::Engine(TurnEvent::TransportClosed));
            }
            Action::RecordDelay(d) => self.sink.emit(WireEvent::Delay {
                call_id: self.call_id.clone(),
                t_ms: now,
                stt_ms: d.stt_ms,
                llm_ms: d.llm_ms,
                tts_ms: d.tts_ms,
                total_ms: d.total_ms,
            }),
        }
    }

    fn play(&mut self, chunk: AudioChunk, now: Millis) {
        let duration = chunk.duration_ms;
        if let Err(e) = self.adapters.transport.play(&chunk) {
            return self.fail(now, e.to_string());
        }
        self.playback_until = self.playback_until.max(now) + duration;
    }

    fn listen(&mut self, now: Millis) {
        if let Err(e) = self.adapters.recognizer.start_listening() {
            return self.fail(now, e.to_string());
        }
        let signal = match self.adapters.transport.capture() {
            Ok(s) => s,
            Err(e) => return self.fail(now, e.to_string()),
        };
        match signal {
            VictimSignal::Speech {
                text,
                starts_after_ms,
                duration_ms,
            } => {
                if starts_after_ms >= self.silence_ms {
                    self.agenda.push(
                        now + self.silence_ms,
                        Pending::Engine(TurnEvent::TimerExpired(TimerKind::NoInput)),
                    );
                }
                let ended = now + starts_after_ms + duration_ms;
                match self.adapters.recognizer.feed(&text, duration_ms) {
                    Ok(t) => self.agenda.push(
                        ended + t.finalize_ms,
                        Pending::Final {
                            text: t.text,
                            speech_ended_at: ended,
                            audio_s: t.audio_s,
                        },
                    ),
                    Err(e) => self.fail(now, e.to_string()),
                }
            }
            VictimSignal::Silence => self.agenda.push(
                now + self.silence_ms,
                Pending::Engine(TurnEvent::TimerExpired(TimerKind::NoInput)),
            ),
            VictimSignal::Hangup { after_ms } => self
                .agenda
                .push(now + after_ms, Pending::Engine(TurnEvent::RemoteHangup)),
        }
    }

    /// Publishes finished transcript entries and state changes.
    fn publish(&mut self, now: Millis) {
        let state = self.engine.state();
        let transcript = self.engine.transcript();
        let open = if in_bot_turn(state) && self.engine.turn_has_audio() {
            transcript
                .iter()
                .rposition(|e| e.speaker == Speaker::Bot && e.kind == EntryKind::Utterance)
                .unwrap_or(transcript.len())
        } else {
            transcript.len()
        };
        for entry in &transcript[self.emitted.min(open)..open] {
            let playback_ms = if entry.speaker == Speaker::Bot && entry.kind == EntryKind::Utterance
            {
                let p = self
                    .engine
                    .playback_ms()
                    .get(self.bot_entries_emitted)
                    .copied();
                self.bot_entries_emitted += 1;
                p
            } else {
                None
            };
            self.sink.emit(WireEvent::Transcript {
                call_id: self.call_id.clone(),
                t_ms: entry.t_ms,
                speaker: entry.speaker,
                text: entry.text.clone(),
                kind: entry.kind,
                playback_ms,
            });
            if entry.kind == EntryKind::Error {
                self.sink.emit(WireEvent::Error {
                    call_id: self.call_id.clone(),
                    t_ms: entry.t_ms,
                    message: entry.text.clone(),
                });
            }
        }
        self.emitted = self.emitted.max(open);
        if self.last_state != Some(state) {
            self.last_state = Some(state);
            self.sink.emit(WireEvent::State {
                call_id: self.call_id.clone(),
                t_ms: now,
                state,
            });
        }
    }

    fn step(&mut self, now: Millis, item: Pending) {
        let event = match item {
            Pending::Engine(e) => e,
            Pending::Final {
                text,
                speech_ended_at,
                audio_s,
            } => {
                if !matches!(self.engine.state(), TurnState::HangingUp | TurnState::Ended) {
                    self.usage.stt_audio_s += audio_s;
                }
                TurnEvent::VictimUtteranceFinal {
                    text,
                    speech_ended_at,
                }
            }
            Pending::PlaybackDone { turn } if turn == self.turn => TurnEvent::PlaybackDone,
            Pending::PlaybackDone { .. } => return,
        };
        let actions = match self.engine.advance(event, now) {
            Ok(actions) => actions,
            Err(e) => self
                .engine
                .advance(TurnEvent::AdapterFailed(e.to_string()), now)
                .unwrap_or_default(),
        };
        self.publish(now);
        for action in actions {
            self.execute(action, now);
        }
        if self.engine.audio_complete() && self.engine.turn_has_audio() && !self.playback_scheduled
        {
            self.playback_scheduled = true;
            let at = self.playback_until.max(now);
            self.agenda
                .push(at, Pending::PlaybackDone { turn: self.turn });
        }
    }
}

fn in_bot_turn(state: TurnState) -> bool {
    matches!(
        state,
        TurnState::BotOpening | TurnState::AwaitingLlm | TurnState::Speaking
    )
}

/// Places one call and returns its record.
///
/// Adapter failures and engine errors do not surface as `Err`: they end the
/// call and are recorded with outcome `Bug`. `Err` is reserved for requests
/// that cannot be started at all.
pub fn run_call(
    request: &CallRequest,
    scenario: &Scenario,
    pipeline: &PipelineConfig,
    adapters: Adapters,
    sink: &mut dyn EventSink,
) -> Result<CallRecord, CallError> {
    request.validate()?;
    if request.scenario_id != scenario.id {
        return Err(CallError::ScenarioMismatch {
            requested: request.scenario_id.clone(),
            loaded: scenario.id.clone(),
        });
    }
    let persona = scenario
        .persona(&request.persona_id)
        .ok_or_else(|| CallError::UnknownPersona(request.persona_id.clone()))?;
    let prompt = render_prompt(persona, &request.victim.name)?;
    let engine = TurnEngine::new(prompt.clone(), persona.eoc_sentinel.clone())
        .with_barge_in(pipeline.barge_in);

    let mut d = Driver {
        call_id: request.id.clone(),
        engine,
        adapters,
        agenda: Agenda::default(),
        usage: UsageCounters::default(),
        silence_ms: pipeline.silence_timeout_ms,
        playback_until: 0,
        turn: 0,
        playback_scheduled: false,
        sink,
        emitted: 0,
        bot_entries_emitted: 0,
        last_state: None,
    };
    d.publish(0);
    match d.adapters.transport.dial(&request.victim.phone) {
        Ok(()) => d.agenda.push(0, Pending::Engine(TurnEvent::CallConnected)),
        Err(e) => d.fail(0, e.to_string()),
    }
    d.agenda.push(
        request.max_duration_s * 1000,
        Pending::Engine(TurnEvent::TimerExpired(TimerKind::CallCap)),
    );

    let mut ended_at = 0;
    while let Some((now, item)) = d.agenda.pop() {
        d.step(now, item);
        if d.engine.state() == TurnState::Ended {
            ended_at = now;
            break;
        }
    }
    d.publish(ended_at);

    let mut usage = d.usage;
    usage.call_duration_s = ended_at as f64 / 1000.0;
    let sink = d.sink;
    let (transcript, delays, playback_ms) = d.engine.into_parts();
    let mut record = CallRecord {
        request: request.clone(),
        prompt,
        transcript,
        usage,
        outcome: OutcomeRecord {
            class: OutcomeClass::Bug,
            evidence: None,
            annotated: false,
        },
        started_at: 0,
        ended_at,
        delays_ms: delays.iter().map(|b| b.total_ms).collect(),
        delay_breakdown: delays,
        playback_ms,
    };
    record.outcome = classify_outcome(&record, &secrets_for(scenario, &request.persona_id));

    sink.emit(WireEvent::Usage {
        call_id: request.id.clone(),
        t_ms: ended_at,
        usage,
    });
    sink.emit(WireEvent::Outcome {
        call_id: request.id.clone(),
        t_ms: ended_at,
        class: record.outcome.class,
        evidence: record.outcome.evidence,
    });
    Ok(record)
}
