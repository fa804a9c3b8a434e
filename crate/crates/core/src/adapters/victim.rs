//! Scripted victim: keyword-driven replies with per-level disclosure odds.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Disposition, Scenario, Sensitivity};
use crate::error::InvariantViolation;
use crate::text::contains_phrase;

/// Failure-branch weights per discretion level, as `[refused, deferred, wrong_info]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FailureMix(pub [[f64; 3]; 4]);

impl FailureMix {
    /// Normalized distribution for `level` (1..=4).
    pub fn distribution(&self, level: u8) -> [f64; 3] {
        let row = self.0[level_index(level)];
        let total: f64 = row.iter().sum();
        row.map(|w| w / total)
    }
}

/// Simulated victim behaviour, indexed by discretion level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VictimPolicy {
    /// Probability of disclosing a requested secret, for levels 1..=4.
    pub disclose_prob: [f64; 4],
    /// Keyed by target fact; `default` applies to any other key.
    pub failure_mix: BTreeMap<String, FailureMix>,
    /// Requests for sensitive data tolerated before hanging up.
    pub persistence: u32,
    /// Spell secrets character by character across two utterances.
    pub spell_secrets: bool,
}

impl Default for VictimPolicy {
    fn default() -> Self {
        // Successes out of 60 per level: 46, 35, 23, 20.
        let mut failure_mix = BTreeMap::new();
        failure_mix.insert(
            "default".to_string(),
            FailureMix([
                [6.0, 6.0, 1.0],
                [5.0, 16.0, 1.0],
                [25.0, 11.0, 1.0],
                [25.0, 15.0, 0.0],
            ]),
        );
        Self {
            disclose_prob: [46.0 / 60.0, 35.0 / 60.0, 23.0 / 60.0, 20.0 / 60.0],
            failure_mix,
            persistence: 3,
            spell_secrets: false,
        }
    }
}

impl VictimPolicy {
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        for (i, p) in self.disclose_prob.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                return Err(InvariantViolation::new(
                    format!("victim_policy.disclose_prob[{i}]"),
                    format!("{p} is outside [0, 1]"),
                ));
            }
        }
        if !self.failure_mix.contains_key("default") {
            return Err(InvariantViolation::new(
                "victim_policy.failure_mix.default",
                "a default mix is required",
            ));
        }
        for (key, mix) in &self.failure_mix {
            for (level, row) in mix.0.iter().enumerate() {
                let total: f64 = row.iter().sum();
                if row.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || !(total > 0.0) {
                    return Err(InvariantViolation::new(
                        format!("victim_policy.failure_mix.{key}[{level}]"),
                        "weights must be non-negative with a positive sum",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn disclose_prob(&self, level: u8) -> f64 {
        self.disclose_prob[level_index(level)]
    }

    pub fn mix_for(&self, key: &str) -> &FailureMix {
        self.failure_mix
            .get(key)
            .or_else(|| self.failure_mix.get("default"))
            .expect("validated policy has a default mix")
    }
}

fn level_index(level: u8) -> usize {
    usize::from(level.clamp(1, 4) - 1)
}

/// Draws whether a victim at `level` discloses `key`, and how they fail if not.
pub fn decide_disposition<R: Rng + ?Sized>(
    policy: &VictimPolicy,
    level: u8,
    key: &str,
    rng: &mut R,
) -> Disposition {
    if rng.random::<f64>() < policy.disclose_prob(level) {
        return Disposition::Disclose;
    }
    let [refused, deferred, _] = policy.mix_for(key).distribution(level);
    let u = rng.random::<f64>();
    if u < refused {
        Disposition::Refuse
    } else if u < refused + deferred {
        Disposition::Defer
    } else {
        Disposition::WrongInfo
    }
}

/// What a bot utterance is asking for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BotIntent {
    Greeting,
    /// Fact keys requested, in scenario order.
    InfoRequest(Vec<String>),
    /// A question the scenario has no fact for.
    UnknownRequest,
    Closing,
    Other,
}

const GREETING_MARKERS: &[&str] = &["hello", "hi", "good morning", "good afternoon", "this is"];
const CLOSING_MARKERS: &[&str] = &["goodbye", "bye"];
const REQUEST_MARKERS: &[&str] = &["could you", "can you", "would you", "please", "do you"];

pub fn classify_bot_utterance(scenario: &Scenario, utterance: &str) -> BotIntent {
    let keys: Vec<String> = scenario
        .facts
        .iter()
        .filter(|f| f.keywords.iter().any(|k| contains_phrase(utterance, k)))
        .map(|f| f.key.clone())
        .collect();
    if !keys.is_empty() {
        return BotIntent::InfoRequest(keys);
    }
    if CLOSING_MARKERS
        .iter()
        .any(|m| contains_phrase(utterance, m))
    {
        return BotIntent::Closing;
    }
    if utterance.contains('?')
        && REQUEST_MARKERS
            .iter()
            .any(|m| contains_phrase(utterance, m))
    {
        return BotIntent::UnknownRequest;
    }
    if GREETING_MARKERS
        .iter()
        .any(|m| contains_phrase(utterance, m))
    {
        return BotIntent::Greeting;
    }
    BotIntent::Other
}

/// A `pattern => template` reply rule. Templates may use `{name}` and `{company}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogueRule {
    pub pattern: String,
    pub template: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogueRules {
    rules: Vec<DialogueRule>,
}

const DEFAULT_RULES: &str = "\
# bot phrase => victim reply
good morning => Good morning, {company}, {name} speaking. How can I help you?
good afternoon => Good afternoon, {company}, {name} speaking. How can I help you?
hello => Hello, {company}, {name} speaking. How can I help you?
hi => Hi, {company}, {name} speaking. How can I help you?
goodbye => Thank you, goodbye.
bye => Bye.
";

impl Default for DialogueRules {
    fn default() -> Self {
        Self::parse(DEFAULT_RULES).expect("built-in rules parse")
    }
}

impl DialogueRules {
    /// Parses one rule per line; blank lines and `#` comments are skipped.
    pub fn parse(src: &str) -> Result<Self, InvariantViolation> {
        let mut rules = Vec::new();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((pattern, template)) = line.split_once("=>") else {
                return Err(InvariantViolation::new(
                    format!("dialogue line {}", i + 1),
                    "expected `pattern => response`",
                ));
            };
            let (pattern, template) = (pattern.trim(), template.trim());
            if pattern.is_empty() || template.is_empty() {
                return Err(InvariantViolation::new(
                    format!("dialogue line {}", i + 1),
                    "pattern and response must be non-empty",
                ));
            }
            rules.push(DialogueRule {
                pattern: pattern.to_string(),
                template: template.to_string(),
            });
        }
        Ok(Self { rules })
    }

    pub fn rules(&self) -> &[DialogueRule] {
        &self.rules
    }

    pub fn reply(&self, utterance: &str, name: &str, company: &str) -> Option<String> {
        self.rules
            .iter()
            .find(|r| contains_phrase(utterance, &r.pattern))
            .map(|r| {
                r.template
                    .replace("{name}", name)
                    .replace("{company}", company)
            })
    }
}

const REFUSALS: &[&str] = &[
    "I'm sorry, but I can't share that information over the phone.",
    "No, I'm not allowed to give that out. Company policy.",
    "I'd rather not share that, sorry.",
    "That's confidential, I can't give it to you.",
];

const DEFERRALS: &[&str] = &[
    "I'm not authorized to give that out. Let me transfer you to a colleague who can help.",
    "Could you send an email to our general address with the request? Someone will get back to you.",
    "I'll have to check with my manager first. We'll call you back on the official number.",
];

/// The victim's reply and whether they put the phone down afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VictimTurn {
    pub text: Option<String>,
    pub hangup: bool,
}

impl VictimTurn {
    fn say(text: impl Into<String>) -> Self {
        Self {
            text: Some(text.into()),
            hangup: false,
        }
    }

    fn hang_up() -> Self {
        Self {
            text: None,
            hangup: true,
        }
    }
}

/// Rule-based stand-in for the person answering the phone.
#[derive(Debug, Clone)]
pub struct ScriptedVictim {
    scenario: Arc<Scenario>,
    policy: VictimPolicy,
    level: u8,
    name: String,
    rules: DialogueRules,
    rng: ChaCha8Rng,
    disposition: Option<Disposition>,
    wrong: BTreeMap<String, String>,
    sensitive_requests: u32,
    wants_to_end: bool,
    spelling_rest: Option<String>,
}

impl ScriptedVictim {
    pub fn new(
        scenario: Arc<Scenario>,
        policy: VictimPolicy,
        level: u8,
        name: impl Into<String>,
        seed: u64,
    ) -> Self {
        Self {
            scenario,
            policy,
            level,
            name: name.into(),
            rules: DialogueRules::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            disposition: None,
            wrong: BTreeMap::new(),
            sensitive_requests: 0,
            wants_to_end: false,
            spelling_rest: None,
        }
    }

    /// Fixes the decision instead of sampling it on first request.
    pub fn with_disposition(mut self, disposition: Option<Disposition>) -> Self {
        self.disposition = disposition;
        self
    }

    pub fn with_rules(mut self, rules: DialogueRules) -> Self {
        self.rules = rules;
        self
    }

    pub fn disposition(&self) -> Option<Disposition> {
        self.disposition
    }

    pub fn respond(&mut self, bot_utterance: &str) -> VictimTurn {
        if let Some(rest) = self.spelling_rest.take() {
            return VictimTurn::say(format!("{rest}."));
        }
        match classify_bot_utterance(&self.scenario, bot_utterance) {
            BotIntent::InfoRequest(keys) => self.answer(&keys),
            BotIntent::UnknownRequest => {
                VictimTurn::say("I'm sorry, I don't have that information.")
            }
            intent => {
                let company = self.scenario.company.clone();
                if let Some(reply) = self.rules.reply(bot_utterance, &self.name, &company) {
                    return VictimTurn::say(reply);
                }
                match intent {
                    BotIntent::Closing => VictimTurn::say("Goodbye."),
                    _ => VictimTurn::say("Okay. How can I help you?"),
                }
            }
        }
    }

    fn answer(&mut self, keys: &[String]) -> VictimTurn {
        let scenario = Arc::clone(&self.scenario);
        let facts: Vec<_> = keys.iter().filter_map(|k| scenario.fact(k)).collect();
        let public: Vec<_> = facts
            .iter()
            .filter(|f| f.sensitivity == Sensitivity::Public)
            .collect();
        let sensitive: Vec<_> = facts
            .iter()
            .filter(|f| f.sensitivity == Sensitivity::Sensitive)
            .collect();

        let mut parts: Vec<String> = public
            .iter()
            .map(|f| format!("{} is {}.", capitalize(&label(&f.key)), f.value))
            .collect();

        if !sensitive.is_empty() {
            self.sensitive_requests += 1;
            if self.wants_to_end || self.sensitive_requests > self.policy.persistence {
                return VictimTurn::hang_up();
            }
            let primary_key = sensitive[sensitive.len() - 1].key.clone();
            let disposition = match self.disposition {
                Some(d) => d,
                None => {
                    let d =
                        decide_disposition(&self.policy, self.level, &primary_key, &mut self.rng);
                    self.disposition = Some(d);
                    d
                }
            };
            match disposition {
                Disposition::Disclose => {
                    for (i, fact) in sensitive.iter().enumerate() {
                        let last = i + 1 == sensitive.len();
                        if last && self.policy.spell_secrets && fact.value.chars().count() >= 4 {
                            let chars: Vec<char> =
                                fact.value.chars().filter(|c| !c.is_whitespace()).collect();
                            let half = chars.len() / 2;
                            let spell = |cs: &[char]| {
                                cs.iter()
                                    .map(|c| c.to_string())
                                    .collect::<Vec<_>>()
                                    .join(" ")
                            };
                            parts.push(format!(
                                "Sure, {} is {}",
                                label(&fact.key),
                                spell(&chars[..half])
                            ));
                            self.spelling_rest = Some(spell(&chars[half..]));
                        } else {
                            parts.push(format!("Sure, {} is {}.", label(&fact.key), fact.value));
                        }
                    }
                }
                Disposition::Refuse => {
                    parts.push(
                        REFUSALS
                            .choose(&mut self.rng)
                            .copied()
                            .unwrap_or(REFUSALS[0])
                            .into(),
                    );
                }
                Disposition::Defer => {
                    self.wants_to_end = true;
                    parts.push(
                        DEFERRALS
                            .choose(&mut self.rng)
                            .copied()
                            .unwrap_or(DEFERRALS[0])
                            .into(),
                    );
                }
                Disposition::WrongInfo => {
                    for fact in &sensitive {
                        let wrong = match self.wrong.get(&fact.key) {
                            Some(w) => w.clone(),
                            None => {
                                let w = wrong_value(&fact.value, &mut self.rng);
                                self.wrong.insert(fact.key.clone(), w.clone());
                                w
                            }
                        };
                        parts.push(format!("Sure, {} is {}.", label(&fact.key), wrong));
                    }
                }
            }
        }

        if parts.is_empty() {
            return VictimTurn::say("I'm sorry, I don't have that information.");
        }
        VictimTurn::say(parts.join(" "))
    }
}

/// One exchange with a fresh victim at `level`.
pub fn scripted_victim_respond(
    policy: &VictimPolicy,
    scenario: Arc<Scenario>,
    level: u8,
    bot_utterance: &str,
    seed: u64,
) -> VictimTurn {
    ScriptedVictim::new(scenario, policy.clone(), level, "Alex", seed).respond(bot_utterance)
}

/// A plausible but wrong variant of `value`: two alphanumeric positions changed.
pub fn wrong_value<R: Rng + ?Sized>(value: &str, rng: &mut R) -> String {
    let mut chars: Vec<char> = value.chars().collect();
    let mut positions: Vec<usize> = chars
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_ascii_alphanumeric())
        .map(|(i, _)| i)
        .collect();
    let changes = positions.len().min(2);
    for _ in 0..changes {
        let idx = rng.random_range(0..positions.len());
        let pos = positions.swap_remove(idx);
        let c = chars[pos];
        chars[pos] = loop {
            let candidate = if c.is_ascii_digit() {
                char::from(b'0' + rng.random_range(0..10u8))
            } else if c.is_ascii_uppercase() {
                char::from(b'A' + rng.random_range(0..26u8))
            } else {
                char::from(b'a' + rng.random_range(0..26u8))
            };
            if !candidate.eq_ignore_ascii_case(&c) {
                break candidate;
            }
        };
    }
    chars.into_iter().collect()
}

fn label(key: &str) -> String {
    match key {
        "ssn" => "my social security number".to_string(),
        "password" => "the password".to_string(),
        "username" => "the username".to_string(),
        "ceo_phone" => "the CEO's direct number".to_string(),
        other => format!("our {}", other.replace('_', " ")),
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
