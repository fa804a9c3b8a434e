use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::victim::{ScriptedVictim, VictimTurn};
use super::{
    AdapterError, LatencyModel, Recognizer, SynthesizedChunk, Synthesizer, Transcription,
    Transport, VictimSignal,
};
use crate::domain::Millis;
use crate::pipeline::AudioChunk;

/// Whoever is on the other end of the line.
pub trait Callee: Send {
    /// Reacts to everything the bot said since the last reply.
    fn respond(&mut self, bot_said: &str) -> VictimTurn;
    /// Whether replies come with a simulated thinking pause.
    fn simulated(&self) -> bool {
        true
    }
}

impl Callee for ScriptedVictim {
    fn respond(&mut self, bot_said: &str) -> VictimTurn {
        ScriptedVictim::respond(self, bot_said)
    }
}

/// Input from a person playing the victim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VictimInput {
    Utterance(String),
    Hangup,
}

/// A victim driven by a channel, e.g. a terminal or a websocket.
pub struct ChannelVictim {
    input: Receiver<VictimInput>,
    silence: Duration,
}

impl ChannelVictim {
    pub fn new(input: Receiver<VictimInput>, silence: Duration) -> Self {
        Self { input, silence }
    }
}

impl Callee for ChannelVictim {
    fn respond(&mut self, _bot_said: &str) -> VictimTurn {
        loop {
            return match self.input.recv_timeout(self.silence) {
                Ok(VictimInput::Utterance(text)) if text.trim().is_empty() => continue,
                Ok(VictimInput::Utterance(text)) => VictimTurn {
                    text: Some(text.trim().to_string()),
                    hangup: false,
                },
                Ok(VictimInput::Hangup) | Err(RecvTimeoutError::Disconnected) => VictimTurn {
                    text: None,
                    hangup: true,
                },
                Err(RecvTimeoutError::Timeout) => VictimTurn {
                    text: None,
                    hangup: false,
                },
            };
        }
    }

    fn simulated(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportState {
    Idle,
    Connected,
    HungUp,
}

/// In-memory phone line. Bot audio is collected as text for the callee.
pub struct MockTransport {
    state: TransportState,
    callee: Box<dyn Callee>,
    heard: String,
    latency: LatencyModel,
    rng: ChaCha8Rng,
    fail_dial: bool,
}

impl MockTransport {
    pub fn new(callee: Box<dyn Callee>, latency: LatencyModel, seed: u64) -> Self {
        Self {
            state: TransportState::Idle,
            callee,
            heard: String::new(),
            latency,
            rng: ChaCha8Rng::seed_from_u64(seed),
            fail_dial: false,
        }
    }

    pub fn failing_dial(mut self) -> Self {
        self.fail_dial = true;
        self
    }

    pub fn state(&self) -> TransportState {
        self.state
    }
}

impl Transport for MockTransport {
    fn dial(&mut self, phone: &str) -> Result<(), AdapterError> {
        if self.state != TransportState::Idle {
            return Err(AdapterError::Transport("line already used".into()));
        }
        if self.fail_dial {
            return Err(AdapterError::Transport(format!("no answer from {phone}")));
        }
        self.state = TransportState::Connected;
        Ok(())
    }

    fn play(&mut self, chunk: &AudioChunk) -> Result<(), AdapterError> {
        match self.state {
            TransportState::Connected => {
                self.heard.push_str(&chunk.text);
                Ok(())
            }
            TransportState::Idle => Err(AdapterError::Transport("play before dial".into())),
            TransportState::HungUp => Err(AdapterError::Transport("play after hangup".into())),
        }
    }

    fn capture(&mut self) -> Result<VictimSignal, AdapterError> {
        if self.state != TransportState::Connected {
            return Err(AdapterError::Transport("capture on a closed line".into()));
        }
        let heard = std::mem::take(&mut self.heard);
        let turn = self.callee.respond(heard.trim());
        let pause = if self.callee.simulated() {
            self.latency.victim_think_ms.sample(&mut self.rng)
        } else {
            0
        };
        Ok(match turn {
            VictimTurn {
                text: Some(text), ..
            } => VictimSignal::Speech {
                duration_ms: self.latency.playback_ms(text.chars().count() as u64),
                text,
                starts_after_ms: pause,
            },
            VictimTurn {
                text: None,
                hangup: true,
            } => VictimSignal::Hangup { after_ms: pause },
            VictimTurn {
                text: None,
                hangup: false,
            } => VictimSignal::Silence,
        })
    }

    fn hangup(&mut self) -> Result<(), AdapterError> {
        self.state = TransportState::HungUp;
        Ok(())
    }
}

/// Recognizer with perfect accuracy and sampled endpointing latency.
pub struct MockRecognizer {
    listening: bool,
    latency: LatencyModel,
    rng: ChaCha8Rng,
}

impl MockRecognizer {
    pub fn new(latency: LatencyModel, seed: u64) -> Self {
        Self {
            listening: false,
            latency,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn listening(&self) -> bool {
        self.listening
    }
}

impl Recognizer for MockRecognizer {
    fn start_listening(&mut self) -> Result<(), AdapterError> {
        self.listening = true;
        Ok(())
    }

    fn feed(&mut self, text: &str, duration_ms: Millis) -> Result<Transcription, AdapterError> {
        if !self.listening {
            return Err(AdapterError::Recognizer("fed while not listening".into()));
        }
        // One final per listening window.
        self.listening = false;
        Ok(Transcription {
            text: text.to_string(),
            audio_s: duration_ms as f64 / 1000.0,
            finalize_ms: self.latency.stt_finalize_ms.sample(&mut self.rng),
        })
    }

    fn stop_listening(&mut self) {
        self.listening = false;
    }
}

/// Streaming synthesizer: one chunk per word, strictly first-in-first-out.
pub struct MockSynthesizer {
    latency: LatencyModel,
    rng: ChaCha8Rng,
    busy_until: Millis,
    first_in_utterance: bool,
}

impl MockSynthesizer {
    pub fn new(latency: LatencyModel, seed: u64) -> Self {
        Self {
            latency,
            rng: ChaCha8Rng::seed_from_u64(seed),
            busy_until: 0,
            first_in_utterance: true,
        }
    }
}

impl Synthesizer for MockSynthesizer {
    fn push_word(&mut self, word: &str, now: Millis) -> Result<SynthesizedChunk, AdapterError> {
        let text = format!("{word} ");
        let chars = text.chars().count() as u64;
        let latency = if std::mem::take(&mut self.first_in_utterance) {
            self.latency.tts_first_chunk_ms.sample(&mut self.rng)
        } else {
            0
        };
        let ready_at = (now + latency).max(self.busy_until);
        self.busy_until = ready_at;
        Ok(SynthesizedChunk {
            chunk: AudioChunk {
                duration_ms: self.latency.playback_ms(chars),
                text,
                chars,
            },
            ready_at,
        })
    }

    fn end_utterance(&mut self) {
        self.first_in_utterance = true;
    }
}
