//! Core vocabulary shared by every other module.
//!
//! All values here are plain data: immutable once validated and cheap to share
//! across concurrently running call sessions.

use serde::{Deserialize, Serialize};

use crate::error::InvariantViolation;

/// Sentinel the language model emits to request a hangup.
pub const DEFAULT_EOC_SENTINEL: &str = "<END_OF_CALL>";

/// Per-call cap on duration, in seconds.
pub const DEFAULT_MAX_DURATION_S: u64 = 600;

/// Milliseconds on the call's (possibly simulated) clock.
pub type Millis = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    Benign,
    Malicious,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensitivity {
    Public,
    Sensitive,
}

/// Scripted lines used by the deterministic language-model stand-in.
///
/// Live models ignore this; it only drives [`crate::adapters::ScriptedLlm`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct PersonaScript {
    pub greeting: String,
    pub request: String,
    pub follow_up: String,
    pub thanks: String,
    pub deflect: String,
    /// Fact the persona is after. Defaults to the target secret for malicious personas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_key: Option<String>,
    /// Optional sentences appended at random to lengthen a reply.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub elaborations: Vec<String>,
}

/// The caller identity that parameterizes the system prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub id: String,
    pub name: String,
    pub purpose: String,
    pub tone: String,
    pub backstory: String,
    #[serde(default = "default_sentinel")]
    pub eoc_sentinel: String,
    #[serde(default = "default_voice")]
    pub voice_id: String,
    pub intent: Intent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_secret_key: Option<String>,
    #[serde(default)]
    pub script: PersonaScript,
}

fn default_sentinel() -> String {
    DEFAULT_EOC_SENTINEL.to_string()
}

fn default_voice() -> String {
    "premade-default".to_string()
}

impl Persona {
    /// Checks the invariants that do not need the scenario's fact list.
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        let field = |f: &str| format!("personas.{}.{f}", self.id);
        if self.id.trim().is_empty() {
            return Err(InvariantViolation::new("personas.id", "must be non-empty"));
        }
        for (name, value) in [
            ("name", &self.name),
            ("purpose", &self.purpose),
            ("tone", &self.tone),
            ("backstory", &self.backstory),
        ] {
            if value.trim().is_empty() {
                return Err(InvariantViolation::new(field(name), "must be non-empty"));
            }
        }
        if self.eoc_sentinel.is_empty() {
            return Err(InvariantViolation::new(
                field("eoc_sentinel"),
                "must be non-empty",
            ));
        }
        if self.eoc_sentinel.contains(['\n', '\r']) {
            return Err(InvariantViolation::new(
                field("eoc_sentinel"),
                "must not contain a newline",
            ));
        }
        for (name, value) in [
            ("name", &self.name),
            ("purpose", &self.purpose),
            ("tone", &self.tone),
            ("backstory", &self.backstory),
        ] {
            if value.contains(&self.eoc_sentinel) {
                return Err(InvariantViolation::new(
                    field(name),
                    "contains the end-of-call sentinel verbatim",
                ));
            }
        }
        if self.intent == Intent::Malicious && self.target_secret_key.is_none() {
            return Err(InvariantViolation::new(
                field("target_secret_key"),
                "required for malicious personas",
            ));
        }
        Ok(())
    }

    /// Fact key the persona tries to obtain, if any.
    pub fn goal_key(&self) -> Option<&str> {
        self.script
            .goal_key
            .as_deref()
            .or(self.target_secret_key.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VictimProfile {
    pub name: String,
    pub phone: String,
    pub discretion_level: u8,
}

impl VictimProfile {
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        if self.name.trim().is_empty() {
            return Err(InvariantViolation::new("victim.name", "must be non-empty"));
        }
        if !(1..=4).contains(&self.discretion_level) {
            return Err(InvariantViolation::new(
                "victim.discretion_level",
                format!("{} is outside 1..=4", self.discretion_level),
            ));
        }
        if !is_valid_phone(&self.phone) {
            return Err(InvariantViolation::new(
                "victim.phone",
                format!("{:?} is neither E.164 nor sim:<n>", self.phone),
            ));
        }
        Ok(())
    }
}

/// E.164 (`+` and 2..=15 digits) or a synthetic `sim:<n>` line.
pub fn is_valid_phone(phone: &str) -> bool {
    if let Some(n) = phone.strip_prefix("sim:") {
        return !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit());
    }
    match phone.strip_prefix('+') {
        Some(digits) => {
            (2..=15).contains(&digits.len())
                && digits.bytes().all(|b| b.is_ascii_digit())
                && !digits.starts_with('0')
        }
        None => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFact {
    pub key: String,
    pub value: String,
    pub sensitivity: Sensitivity,
    /// Phrases that mark a caller's request for this fact.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<String>,
    /// Invented placeholder value rather than a reference value.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fixture: bool,
}

/// A staged scenario: the facts a victim holds plus the cast of callers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub company: String,
    pub facts: Vec<ScenarioFact>,
    pub personas: Vec<Persona>,
    #[serde(default)]
    pub victims: Vec<VictimProfile>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        if self.facts.is_empty() {
            return Err(InvariantViolation::new(
                "facts",
                "scenario needs at least one fact",
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for fact in &self.facts {
            if !seen.insert(fact.key.as_str()) {
                return Err(InvariantViolation::new(
                    format!("facts.{}", fact.key),
                    "duplicate fact key",
                ));
            }
            if fact.value.trim().is_empty() {
                return Err(InvariantViolation::new(
                    format!("facts.{}.value", fact.key),
                    "must be non-empty",
                ));
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for persona in &self.personas {
            persona.validate()?;
            if !ids.insert(persona.id.as_str()) {
                return Err(InvariantViolation::new(
                    format!("personas.{}", persona.id),
                    "duplicate persona id",
                ));
            }
            if persona.intent == Intent::Malicious {
                let key = persona.target_secret_key.as_deref().unwrap_or_default();
                let matches = self
                    .facts
                    .iter()
                    .filter(|f| f.key == key && f.sensitivity == Sensitivity::Sensitive)
                    .count();
                if matches != 1 {
                    return Err(InvariantViolation::new(
                        format!("personas.{}.target_secret_key", persona.id),
                        format!("{key:?} does not name a sensitive fact"),
                    ));
                }
            }
            if let Some(goal) = persona.goal_key() {
                if self.fact(goal).is_none() {
                    return Err(InvariantViolation::new(
                        format!("personas.{}.script.goal_key", persona.id),
                        format!("unknown fact {goal:?}"),
                    ));
                }
            }
        }
        for victim in &self.victims {
            victim.validate()?;
        }
        Ok(())
    }

    pub fn fact(&self, key: &str) -> Option<&ScenarioFact> {
        self.facts.iter().find(|f| f.key == key)
    }

    pub fn persona(&self, id: &str) -> Option<&Persona> {
        self.personas.iter().find(|p| p.id == id)
    }

    pub fn secrets(&self) -> impl Iterator<Item = &ScenarioFact> {
        self.facts
            .iter()
            .filter(|f| f.sensitivity == Sensitivity::Sensitive)
    }
}

/// What a simulated victim has already decided to do when asked for the secret.
///
/// Campaigns may pre-assign this to hold cohort composition fixed; when absent
/// the victim policy samples it on first request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Disclose,
    Refuse,
    Defer,
    WrongInfo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRequest {
    pub id: String,
    pub persona_id: String,
    pub victim: VictimProfile,
    pub scenario_id: String,
    #[serde(default = "default_max_duration")]
    pub max_duration_s: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disposition: Option<Disposition>,
}

fn default_max_duration() -> u64 {
    DEFAULT_MAX_DURATION_S
}

impl CallRequest {
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        if self.id.trim().is_empty() {
            return Err(InvariantViolation::new("request.id", "must be non-empty"));
        }
        if self.max_duration_s == 0 {
            return Err(InvariantViolation::new(
                "request.max_duration_s",
                "must be > 0",
            ));
        }
        self.victim.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Bot,
    Victim,
    System,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Utterance,
    SentinelDetected,
    Hangup,
    Timeout,
    Error,
}

impl EntryKind {
    pub fn is_terminal(self) -> bool {
        matches!(self, EntryKind::Hangup | EntryKind::Timeout)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub t_ms: Millis,
    pub speaker: Speaker,
    pub text: String,
    pub kind: EntryKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UsageCounters {
    pub call_duration_s: f64,
    pub stt_audio_s: f64,
    pub tts_chars: u64,
    pub llm_in_tokens: u64,
    pub llm_out_tokens: u64,
}

impl UsageCounters {
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        if !(self.call_duration_s >= 0.0) || !(self.stt_audio_s >= 0.0) {
            return Err(InvariantViolation::new("usage", "durations must be >= 0"));
        }
        if self.stt_audio_s > self.call_duration_s + 1e-9 {
            return Err(InvariantViolation::new(
                "usage.stt_audio_s",
                "exceeds call duration",
            ));
        }
        Ok(())
    }

    /// Field-wise sum; used to aggregate usage across calls.
    pub fn combined(&self, other: &UsageCounters) -> UsageCounters {
        UsageCounters {
            call_duration_s: self.call_duration_s + other.call_duration_s,
            stt_audio_s: self.stt_audio_s + other.stt_audio_s,
            tts_chars: self.tts_chars + other.tts_chars,
            llm_in_tokens: self.llm_in_tokens + other.llm_in_tokens,
            llm_out_tokens: self.llm_out_tokens + other.llm_out_tokens,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeClass {
    Disclosed,
    Refused,
    Deferred,
    Bug,
    WrongInfo,
    Timeout,
}

impl OutcomeClass {
    pub const ALL: [OutcomeClass; 6] = [
        OutcomeClass::Disclosed,
        OutcomeClass::Refused,
        OutcomeClass::Deferred,
        OutcomeClass::Bug,
        OutcomeClass::WrongInfo,
        OutcomeClass::Timeout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeClass::Disclosed => "Disclosed",
            OutcomeClass::Refused => "Refused",
            OutcomeClass::Deferred => "Deferred",
            OutcomeClass::Bug => "Bug",
            OutcomeClass::WrongInfo => "WrongInfo",
            OutcomeClass::Timeout => "Timeout",
        }
    }
}

impl std::fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub class: OutcomeClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<usize>,
    #[serde(default)]
    pub annotated: bool,
}

impl OutcomeRecord {
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        if self.class == OutcomeClass::Disclosed && self.evidence.is_none() {
            return Err(InvariantViolation::new(
                "outcome.evidence",
                "Disclosed requires an evidence index",
            ));
        }
        Ok(())
    }
}

/// Components of one response delay, all in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DelayBreakdown {
    /// Victim stopped speaking until the final transcription.
    pub stt_ms: Millis,
    /// Final transcription until the first complete word left the model.
    pub llm_ms: Millis,
    /// First word until its audio started playing.
    pub tts_ms: Millis,
    pub total_ms: Millis,
}

/// The immutable result of one call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub request: CallRequest,
    /// Rendered system prompt, kept for audit.
    pub prompt: String,
    pub transcript: Vec<TranscriptEntry>,
    pub usage: UsageCounters,
    pub outcome: OutcomeRecord,
    pub started_at: Millis,
    pub ended_at: Millis,
    pub delays_ms: Vec<Millis>,
    #[serde(default)]
    pub delay_breakdown: Vec<DelayBreakdown>,
    /// Playback length of each bot utterance.
    #[serde(default)]
    pub playback_ms: Vec<Millis>,
}

impl CallRecord {
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        if self.ended_at < self.started_at {
            return Err(InvariantViolation::new(
                "record.ended_at",
                "precedes started_at",
            ));
        }
        if self.transcript.windows(2).any(|w| w[1].t_ms < w[0].t_ms) {
            return Err(InvariantViolation::new(
                "record.transcript",
                "timestamps are not monotonically non-decreasing",
            ));
        }
        let terminals = self
            .transcript
            .iter()
            .filter(|e| e.kind.is_terminal())
            .count();
        if terminals != 1 {
            return Err(InvariantViolation::new(
                "record.transcript",
                format!("expected exactly one terminal entry, found {terminals}"),
            ));
        }
        if self
            .transcript
            .iter()
            .any(|e| e.kind == EntryKind::Utterance && e.text.trim().is_empty())
        {
            return Err(InvariantViolation::new(
                "record.transcript",
                "utterance entry with empty text",
            ));
        }
        self.usage.validate()?;
        self.outcome.validate()
    }

    pub fn duration_ms(&self) -> Millis {
        self.ended_at - self.started_at
    }

    pub fn victim_utterances(&self) -> impl Iterator<Item = (usize, &TranscriptEntry)> {
        self.transcript
            .iter()
            .enumerate()
            .filter(|(_, e)| e.speaker == Speaker::Victim && e.kind == EntryKind::Utterance)
    }

    pub fn bot_utterances(&self) -> impl Iterator<Item = &TranscriptEntry> {
        self.transcript
            .iter()
            .filter(|e| e.speaker == Speaker::Bot && e.kind == EntryKind::Utterance)
    }

    pub fn terminal(&self) -> Option<&TranscriptEntry> {
        self.transcript.iter().find(|e| e.kind.is_terminal())
    }
}
