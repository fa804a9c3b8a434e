//! Half-duplex turn engine.
//!
//! The engine is sans-IO: it consumes [`TurnEvent`]s stamped with the call's
//! clock and answers with [`Action`]s for the driver to carry out. Only the
//! driver talks to adapters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::chunker::{SentinelScanner, TextChunker};
use crate::domain::{DelayBreakdown, EntryKind, Millis, Speaker, TranscriptEntry};
use crate::prompt::{ChatHistory, Message, PromptError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnState {
    Dialing,
    BotOpening,
    Listening,
    AwaitingLlm,
    Speaking,
    HangingUp,
    Ended,
}

impl TurnState {
    pub fn as_str(self) -> &'static str {
        match self {
            TurnState::Dialing => "dialing",
            TurnState::BotOpening => "bot_opening",
            TurnState::Listening => "listening",
            TurnState::AwaitingLlm => "awaiting_llm",
            TurnState::Speaking => "speaking",
            TurnState::HangingUp => "hanging_up",
            TurnState::Ended => "ended",
        }
    }

    fn bot_turn(self) -> bool {
        matches!(
            self,
            TurnState::BotOpening | TurnState::AwaitingLlm | TurnState::Speaking
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerKind {
    /// Hard cap on total call duration.
    CallCap,
    /// Victim stayed silent for the configured window.
    NoInput,
}

/// Synthesized audio for one word. "Audio" is text plus a playback length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioChunk {
    pub text: String,
    pub chars: u64,
    pub duration_ms: Millis,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TurnEvent {
    CallConnected,
    /// Final transcription of one victim utterance.
    VictimUtteranceFinal {
        text: String,
        /// When the victim stopped speaking.
        speech_ended_at: Millis,
    },
    LlmToken(String),
    LlmDone,
    AudioChunkReady(AudioChunk),
    /// Every chunk of the current bot utterance has finished playing.
    PlaybackDone,
    TimerExpired(TimerKind),
    /// The victim put the phone down.
    RemoteHangup,
    /// The transport confirmed the line is closed.
    TransportClosed,
    AdapterFailed(String),
}

impl TurnEvent {
    fn name(&self) -> &'static str {
        match self {
            TurnEvent::CallConnected => "CallConnected",
            TurnEvent::VictimUtteranceFinal { .. } => "VictimUtteranceFinal",
            TurnEvent::LlmToken(_) => "LlmToken",
            TurnEvent::LlmDone => "LlmDone",
            TurnEvent::AudioChunkReady(_) => "AudioChunkReady",
            TurnEvent::PlaybackDone => "PlaybackDone",
            TurnEvent::TimerExpired(_) => "TimerExpired",
            TurnEvent::RemoteHangup => "RemoteHangup",
            TurnEvent::TransportClosed => "TransportClosed",
            TurnEvent::AdapterFailed(_) => "AdapterFailed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    StartListening,
    StopListening,
    SendToLlm(Vec<Message>),
    Synthesize(String),
    Play(AudioChunk),
    Hangup,
    RecordDelay(DelayBreakdown),
}

/// What to do with a victim utterance that lands while the bot holds the floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BargeInPolicy {
    Drop,
    #[default]
    Buffer,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("illegal event {event} in state {state:?}")]
    IllegalTransition {
        state: TurnState,
        event: &'static str,
    },
    #[error(transparent)]
    History(#[from] PromptError),
}

#[derive(Debug, Clone, Default)]
struct BotTurn {
    scanner: Option<SentinelScanner>,
    chunker: TextChunker,
    words: Vec<String>,
    awaiting_audio: usize,
    llm_done: bool,
    played_any: bool,
    transcript_index: Option<usize>,
    playback_ms: Millis,
    /// Timing marks of the victim utterance this turn answers.
    speech_ended_at: Option<Millis>,
    final_at: Millis,
    first_word_at: Option<Millis>,
}

/// The per-call turn engine.
#[derive(Debug, Clone)]
pub struct TurnEngine {
    state: TurnState,
    sentinel: String,
    barge_in: BargeInPolicy,
    history: ChatHistory,
    turn: BotTurn,
    eoc: bool,
    failed: bool,
    next_utterance_id: u64,
    buffered: Option<(String, Millis)>,
    transcript: Vec<TranscriptEntry>,
    delays: Vec<DelayBreakdown>,
    playback_ms: Vec<Millis>,
}

impl TurnEngine {
    pub fn new(system_prompt: impl Into<String>, sentinel: impl Into<String>) -> Self {
        Self {
            state: TurnState::Dialing,
            sentinel: sentinel.into(),
            barge_in: BargeInPolicy::default(),
            history: ChatHistory::new(system_prompt),
            turn: BotTurn::default(),
            eoc: false,
            failed: false,
            next_utterance_id: 0,
            buffered: None,
            transcript: Vec::new(),
            delays: Vec::new(),
            playback_ms: Vec::new(),
        }
    }

    pub fn with_barge_in(mut self, policy: BargeInPolicy) -> Self {
        self.barge_in = policy;
        self
    }

    pub fn state(&self) -> TurnState {
        self.state
    }

    pub fn history(&self) -> &ChatHistory {
        &self.history
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn delays(&self) -> &[DelayBreakdown] {
        &self.delays
    }

    pub fn playback_ms(&self) -> &[Millis] {
        &self.playback_ms
    }

    /// True when the call ended through an adapter failure.
    pub fn failed(&self) -> bool {
        self.failed
    }

    /// The model is done and every word has been turned into audio.
    pub fn audio_complete(&self) -> bool {
        self.state.bot_turn() && self.turn.llm_done && self.turn.awaiting_audio == 0
    }

    /// Whether the current bot turn has queued any audio for playback.
    pub fn turn_has_audio(&self) -> bool {
        self.turn.played_any
    }

    pub fn into_parts(self) -> (Vec<TranscriptEntry>, Vec<DelayBreakdown>, Vec<Millis>) {
        (self.transcript, self.delays, self.playback_ms)
    }

    pub fn advance(&mut self, event: TurnEvent, now: Millis) -> Result<Vec<Action>, EngineError> {
        use TurnEvent as E;
        use TurnState as S;

        let illegal = |state, event: &TurnEvent| EngineError::IllegalTransition {
            state,
            event: event.name(),
        };

        match (self.state, event) {
            (S::Ended, _) => Ok(Vec::new()),
            (S::HangingUp, E::TransportClosed) => {
                self.state = S::Ended;
                Ok(Vec::new())
            }
            // Stragglers from adapters after the hangup decision.
            (S::HangingUp, _) => Ok(Vec::new()),

            (_, E::TimerExpired(TimerKind::CallCap)) => {
                self.push(
                    now,
                    Speaker::System,
                    "call duration cap reached",
                    EntryKind::Timeout,
                );
                Ok(self.hang_up(now))
            }
            (_, E::AdapterFailed(msg)) => {
                self.failed = true;
                self.push(now, Speaker::System, msg, EntryKind::Error);
                self.push(now, Speaker::System, "call aborted", EntryKind::Hangup);
                Ok(self.hang_up(now))
            }
            (S::Dialing, e @ E::RemoteHangup) => Err(illegal(S::Dialing, &e)),
            (_, E::RemoteHangup) => {
                self.push(now, Speaker::Victim, "victim hung up", EntryKind::Hangup);
                Ok(self.hang_up(now))
            }

            (S::Dialing, E::CallConnected) => {
                self.state = S::BotOpening;
                self.turn = self.fresh_turn(None, now);
                Ok(vec![Action::SendToLlm(self.history.messages())])
            }

            (S::Listening, E::TimerExpired(TimerKind::NoInput)) => {
                self.push(
                    now,
                    Speaker::System,
                    "no input from victim",
                    EntryKind::Timeout,
                );
                let mut actions = vec![Action::StopListening];
                actions.extend(self.hang_up(now));
                Ok(actions)
            }
            // A silence timer that fired after the victim already spoke.
            (_, E::TimerExpired(TimerKind::NoInput)) => Ok(Vec::new()),

            (
                S::Listening,
                E::VictimUtteranceFinal {
                    text,
                    speech_ended_at,
                },
            ) => self.take_utterance(text, speech_ended_at, now, vec![Action::StopListening]),
            (
                s,
                E::VictimUtteranceFinal {
                    text,
                    speech_ended_at,
                },
            ) if s.bot_turn() => {
                if self.barge_in == BargeInPolicy::Buffer {
                    match &mut self.buffered {
                        Some((pending, _)) => {
                            pending.push(' ');
                            pending.push_str(text.trim());
                        }
                        None => self.buffered = Some((text.trim().to_string(), speech_ended_at)),
                    }
                }
                Ok(Vec::new())
            }

            (s, E::LlmToken(token)) if s.bot_turn() => Ok(self.on_token(&token, now)),
            (s, E::LlmDone) if s.bot_turn() && !self.turn.llm_done => {
                self.turn.llm_done = true;
                let mut actions = Vec::new();
                if let Some(scanner) = self.turn.scanner.as_mut() {
                    if !scanner.found() {
                        let rest = scanner.flush();
                        let mut words = self.turn.chunker.feed(&rest);
                        words.extend(self.turn.chunker.flush());
                        actions.extend(self.queue_words(words, now));
                    }
                }
                if self.turn.awaiting_audio == 0 && !self.turn.played_any {
                    // Nothing to say: the reply was empty or only the sentinel.
                    actions.extend(self.finish_turn(now)?);
                }
                Ok(actions)
            }
            (s, E::AudioChunkReady(chunk)) if s.bot_turn() && self.turn.awaiting_audio > 0 => {
                self.turn.awaiting_audio -= 1;
                let mut actions = Vec::new();
                if s == S::AwaitingLlm {
                    self.state = S::Speaking;
                    if let (Some(ended), Some(first_word)) =
                        (self.turn.speech_ended_at, self.turn.first_word_at)
                    {
                        let delay = DelayBreakdown {
                            stt_ms: self.turn.final_at - ended,
                            llm_ms: first_word - self.turn.final_at,
                            tts_ms: now - first_word,
                            total_ms: now - ended,
                        };
                        self.delays.push(delay);
                        actions.push(Action::RecordDelay(delay));
                    }
                }
                self.turn.played_any = true;
                self.turn.playback_ms += chunk.duration_ms;
                let spoken = chunk.text.trim();
                match self.turn.transcript_index {
                    Some(i) => {
                        let entry = &mut self.transcript[i];
                        if !spoken.is_empty() {
                            if !entry.text.is_empty() {
                                entry.text.push(' ');
                            }
                            entry.text.push_str(spoken);
                        }
                    }
                    None => {
                        self.turn.transcript_index = Some(self.transcript.len());
                        self.push(now, Speaker::Bot, spoken, EntryKind::Utterance);
                    }
                }
                actions.push(Action::Play(chunk));
                Ok(actions)
            }
            (S::BotOpening | S::Speaking, E::PlaybackDone) if self.audio_complete() => {
                self.finish_turn(now)
            }

            (state, event) => Err(illegal(state, &event)),
        }
    }

    fn fresh_turn(&self, speech_ended_at: Option<Millis>, now: Millis) -> BotTurn {
        BotTurn {
            scanner: Some(SentinelScanner::new(self.sentinel.clone())),
            speech_ended_at,
            final_at: now,
            ..BotTurn::default()
        }
    }

    fn take_utterance(
        &mut self,
        text: String,
        speech_ended_at: Millis,
        now: Millis,
        mut actions: Vec<Action>,
    ) -> Result<Vec<Action>, EngineError> {
        let text = text.trim().to_string();
        self.next_utterance_id += 1;
        let messages = self.history.build_messages(self.next_utterance_id, &text)?;
        self.push(now, Speaker::Victim, &text, EntryKind::Utterance);
        self.state = TurnState::AwaitingLlm;
        self.turn = self.fresh_turn(Some(speech_ended_at), now);
        actions.push(Action::SendToLlm(messages));
        Ok(actions)
    }

    fn on_token(&mut self, token: &str, now: Millis) -> Vec<Action> {
        let Some(scanner) = self.turn.scanner.as_mut() else {
            return Vec::new();
        };
        if scanner.found() || self.turn.llm_done {
            return Vec::new();
        }
        let (speakable, found) = scanner.scan(token);
        let mut words = self.turn.chunker.feed(&speakable);
        if found {
            words.extend(self.turn.chunker.flush());
            self.eoc = true;
            self.push(
                now,
                Speaker::System,
                "end-of-call sentinel detected",
                EntryKind::SentinelDetected,
            );
        }
        self.queue_words(words, now)
    }

    fn queue_words(&mut self, words: Vec<String>, now: Millis) -> Vec<Action> {
        if !words.is_empty() && self.turn.first_word_at.is_none() {
            self.turn.first_word_at = Some(now);
        }
        self.turn.awaiting_audio += words.len();
        self.turn.words.extend(words.iter().cloned());
        words.into_iter().map(Action::Synthesize).collect()
    }

    /// The bot utterance is over: either hand the floor back or hang up.
    fn finish_turn(&mut self, now: Millis) -> Result<Vec<Action>, EngineError> {
        self.history.push_caller(self.turn.words.join(" "))?;
        if self.turn.played_any {
            self.playback_ms.push(self.turn.playback_ms);
            self.turn.played_any = false;
        }
        if self.eoc {
            self.push(
                now,
                Speaker::Bot,
                "hung up after end-of-call sentinel",
                EntryKind::Hangup,
            );
            return Ok(self.hang_up(now));
        }
        self.state = TurnState::Listening;
        let mut actions = vec![Action::StartListening];
        if let Some((text, ended)) = self.buffered.take() {
            actions.push(Action::StopListening);
            return self.take_utterance(text, ended, now, actions);
        }
        Ok(actions)
    }

    fn hang_up(&mut self, _now: Millis) -> Vec<Action> {
        if self.state.bot_turn() && self.turn.played_any {
            self.playback_ms.push(self.turn.playback_ms);
            self.turn.played_any = false;
        }
        self.state = TurnState::HangingUp;
        vec![Action::Hangup]
    }

    fn push(&mut self, t_ms: Millis, speaker: Speaker, text: impl Into<String>, kind: EntryKind) {
        self.transcript.push(TranscriptEntry {
            t_ms,
            speaker,
            text: text.into(),
            kind,
        });
    }
}
