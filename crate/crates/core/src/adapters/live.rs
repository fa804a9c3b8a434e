//! Placeholders for hosted providers.
//!
//! They carry the configuration a real client would need and implement the
//! same traits, but every operation returns [`AdapterError::Unavailable`].
//! Wire a real client in behind these types to place actual calls.

use serde::{Deserialize, Serialize};

use super::{
    AdapterError, LanguageModel, Recognizer, SynthesizedChunk, Synthesizer, TokenStream,
    Transcription, Transport, VictimSignal,
};
use crate::domain::Millis;
use crate::pipeline::AudioChunk;
use crate::prompt::Message;

pub const LLM_MODEL: &str = "gpt-4-1106-preview";
pub const TTS_MODEL: &str = "eleven_turbo_v2";
pub const STT_MODEL: &str = "phone_call";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the credential.
    pub api_key_env: String,
}

#[derive(Debug, Clone)]
pub struct LiveLlm(pub ProviderConfig);

#[derive(Debug, Clone)]
pub struct LiveSynthesizer(pub ProviderConfig);

#[derive(Debug, Clone)]
pub struct LiveRecognizer(pub ProviderConfig);

#[derive(Debug, Clone)]
pub struct LiveTransport(pub ProviderConfig);

impl LanguageModel for LiveLlm {
    fn stream_complete(&mut self, _messages: &[Message]) -> Result<TokenStream, AdapterError> {
        Err(AdapterError::Unavailable("live language model"))
    }
}

impl Synthesizer for LiveSynthesizer {
    fn push_word(&mut self, _word: &str, _now: Millis) -> Result<SynthesizedChunk, AdapterError> {
        Err(AdapterError::Unavailable("live synthesizer"))
    }

    fn end_utterance(&mut self) {}
}

impl Recognizer for LiveRecognizer {
    fn start_listening(&mut self) -> Result<(), AdapterError> {
        Err(AdapterError::Unavailable("live recognizer"))
    }

    fn feed(&mut self, _text: &str, _duration_ms: Millis) -> Result<Transcription, AdapterError> {
        Err(AdapterError::Unavailable("live recognizer"))
    }

    fn stop_listening(&mut self) {}
}

impl Transport for LiveTransport {
    fn dial(&mut self, _phone: &str) -> Result<(), AdapterError> {
        Err(AdapterError::Unavailable("live telephony"))
    }

    fn play(&mut self, _chunk: &AudioChunk) -> Result<(), AdapterError> {
        Err(AdapterError::Unavailable("live telephony"))
    }

    fn capture(&mut self) -> Result<VictimSignal, AdapterError> {
        Err(AdapterError::Unavailable("live telephony"))
    }

    fn hangup(&mut self) -> Result<(), AdapterError> {
        Ok(())
    }
}
