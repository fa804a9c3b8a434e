//! System prompt rendering and per-call chat history.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Persona;

/// The one prompt template every persona is rendered through.
///
/// Wording is kept exactly as tuned, including the "when your goal if
/// fulfilled" slip; do not correct it.
pub const PROMPT_TEMPLATE: &str = "You are $name. Your purpose: $purpose. Your tone: $tone. \
Your backstory: $backstory. You will participate in a phone call with $victimName. \
You must follow your purpose and, because this is a phone call and time matters, be as \
concise as possible. If the victim starts pushing back, you are to deflect within your goal \
and not insist excessively while being nice. You should end the conversation when your goal \
if fulfilled or the victim does not seem willing to collaborate. When the conversation \
reaches its end, say the exact following: $eoc. Conversation starts now.";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("missing value for prompt field `{0}`")]
    MissingField(&'static str),
    #[error("rendered prompt must contain the sentinel exactly once, found {0}")]
    SentinelCount(usize),
    #[error("two consecutive {0:?} turns")]
    OrderViolation(Role),
}

/// Renders the system prompt for `persona` calling `victim_name`.
///
/// Substitution is single-pass, so `$`-sequences inside persona text are
/// copied through untouched.
pub fn render_prompt(persona: &Persona, victim_name: &str) -> Result<String, PromptError> {
    let fields: [(&str, &'static str, &str); 6] = [
        ("$victimName", "victimName", victim_name),
        ("$backstory", "backstory", &persona.backstory),
        ("$purpose", "purpose", &persona.purpose),
        ("$name", "name", &persona.name),
        ("$tone", "tone", &persona.tone),
        ("$eoc", "eoc", &persona.eoc_sentinel),
    ];
    for (_, field, value) in &fields {
        if value.trim().is_empty() {
            return Err(PromptError::MissingField(field));
        }
    }

    let mut out = String::with_capacity(PROMPT_TEMPLATE.len() + 512);
    let mut rest = PROMPT_TEMPLATE;
    while let Some(pos) = rest.find('$') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        match fields.iter().find(|(token, _, _)| tail.starts_with(token)) {
            Some((token, _, value)) => {
                out.push_str(value);
                rest = &tail[token.len()..];
            }
            None => {
                out.push('$');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);

    let count = out.matches(persona.eoc_sentinel.as_str()).count();
    if count != 1 {
        return Err(PromptError::SentinelCount(count));
    }
    Ok(out)
}

/// Which side of the call produced a turn.
///
/// `Caller` is the bot (assistant side of the model contract), `Callee` the
/// victim (user side).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    Caller,
    Callee,
}

impl Role {
    /// Role name in chat-completion APIs.
    pub fn api_name(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::Caller => "assistant",
            Role::Callee => "user",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

/// Append-only conversation state fed to the language model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatHistory {
    system_prompt: String,
    turns: Vec<(Role, String)>,
    /// Highest callee utterance id appended so far.
    last_utterance_id: Option<u64>,
}

impl ChatHistory {
    pub fn new(system_prompt: impl Into<String>) -> Self {
        Self {
            system_prompt: system_prompt.into(),
            turns: Vec::new(),
            last_utterance_id: None,
        }
    }

    pub fn system_prompt(&self) -> &str {
        &self.system_prompt
    }

    pub fn turns(&self) -> &[(Role, String)] {
        &self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// System prompt followed by every turn, ready for the model.
    pub fn messages(&self) -> Vec<Message> {
        std::iter::once(Message::new(Role::System, self.system_prompt.clone()))
            .chain(
                self.turns
                    .iter()
                    .map(|(role, text)| Message::new(*role, text.clone())),
            )
            .collect()
    }

    /// Records what the bot said.
    pub fn push_caller(&mut self, text: impl Into<String>) -> Result<(), PromptError> {
        if matches!(self.turns.last(), Some((Role::Caller, _))) {
            return Err(PromptError::OrderViolation(Role::Caller));
        }
        self.turns.push((Role::Caller, text.into()));
        Ok(())
    }

    /// Appends a finalized victim utterance and returns the full message list.
    ///
    /// Utterance ids are per-call monotonic; re-submitting an id that was
    /// already appended leaves the history untouched.
    pub fn build_messages(
        &mut self,
        utterance_id: u64,
        utterance: &str,
    ) -> Result<Vec<Message>, PromptError> {
        let replay = self
            .last_utterance_id
            .is_some_and(|last| utterance_id <= last);
        if !replay {
            if matches!(self.turns.last(), Some((Role::Callee, _))) {
                return Err(PromptError::OrderViolation(Role::Callee));
            }
            self.turns.push((Role::Callee, utterance.to_string()));
            self.last_utterance_id = Some(utterance_id);
        }
        Ok(self.messages())
    }

    /// Rough token estimate (about four characters per token).
    pub fn estimated_tokens(&self) -> u64 {
        estimate_tokens(&self.system_prompt)
            + self
                .turns
                .iter()
                .map(|(_, t)| estimate_tokens(t))
                .sum::<u64>()
    }
}

pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Intent, PersonaScript, DEFAULT_EOC_SENTINEL};
    use proptest::prelude::*;

    fn francis() -> Persona {
        Persona {
            id: "francis".into(),
            name: "Agent Francis".into(),
            purpose: "Convince the callee they are part of a federal inquiry and collect identifying details".into(),
            tone: "Stern and clipped, with an occasional hint that cooperating now avoids trouble later".into(),
            backstory: "You are Agent Francis, a veteran federal investigator working a sensitive case".into(),
            eoc_sentinel: DEFAULT_EOC_SENTINEL.into(),
            voice_id: "v".into(),
            intent: Intent::Benign,
            target_secret_key: None,
            script: PersonaScript::default(),
        }
    }

    #[test]
    fn renders_agent_francis() {
        let p = francis();
        let prompt = render_prompt(&p, "Erika").unwrap();
        assert!(prompt.starts_with("You are Agent Francis. Your purpose: "));
        assert!(prompt.contains(&p.tone));
        assert!(prompt.contains("phone call with Erika."));
        assert_eq!(prompt.matches("<END_OF_CALL>").count(), 1);
        assert!(prompt.contains("be as concise as possible"));
        assert!(
            prompt.contains("deflect within your goal and not insist excessively while being nice")
        );
        assert!(prompt.contains("when your goal if fulfilled"));
        assert!(prompt.ends_with("<END_OF_CALL>. Conversation starts now."));
    }

    #[test]
    fn empty_tone_is_missing_field() {
        let mut p = francis();
        p.tone = "  ".into();
        assert_eq!(
            render_prompt(&p, "Erika"),
            Err(PromptError::MissingField("tone"))
        );
    }

    #[test]
    fn empty_victim_name_is_missing_field() {
        assert_eq!(
            render_prompt(&francis(), ""),
            Err(PromptError::MissingField("victimName"))
        );
    }

    #[test]
    fn dollar_sequences_in_persona_text_are_not_expanded() {
        let mut p = francis();
        p.purpose = "collect $name and $eoc style tokens".into();
        let prompt = render_prompt(&p, "Erika").unwrap();
        assert!(prompt.contains("collect $name and $eoc style tokens"));
    }

    #[test]
    fn victim_name_carrying_sentinel_is_rejected() {
        assert_eq!(
            render_prompt(&francis(), "Bob <END_OF_CALL>"),
            Err(PromptError::SentinelCount(2))
        );
    }

    // Generated attribute strings are long random lowercase runs, so a
    // substring count of 1 can only come from the substitution itself.
    fn attribute() -> impl Strategy<Value = String> {
        "[a-z]{12,40}( [a-z]{3,10}){0,6}"
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn each_attribute_and_sentinel_appear_once(
            name in attribute(), purpose in attribute(), tone in attribute(),
            backstory in attribute(), victim in "[A-Z][a-z]{3,12}",
        ) {
            let mut p = francis();
            p.name = name;
            p.purpose = purpose;
            p.tone = tone;
            p.backstory = backstory;
            let prompt = render_prompt(&p, &victim).unwrap();
            for attr in [&p.name, &p.purpose, &p.tone, &p.backstory] {
                prop_assert_eq!(prompt.matches(attr.as_str()).count(), 1);
            }
            prop_assert_eq!(prompt.matches(DEFAULT_EOC_SENTINEL).count(), 1);
            prop_assert_eq!(render_prompt(&p, &victim).unwrap(), prompt);
        }
    }

    #[test]
    fn empty_history_plus_hello() {
        let mut h = ChatHistory::new("sys");
        let msgs = h.build_messages(1, "Hello?").unwrap();
        assert_eq!(
            msgs,
            vec![
                Message::new(Role::System, "sys"),
                Message::new(Role::Callee, "Hello?")
            ]
        );
    }

    #[test]
    fn three_turns_plus_reply_gives_five_messages() {
        let mut h = ChatHistory::new("sys");
        h.push_caller("Hi, this is Sophia.").unwrap();
        h.build_messages(1, "Hello").unwrap();
        h.push_caller("Could you confirm your password?").unwrap();
        let msgs = h.build_messages(2, "No.").unwrap();
        assert_eq!(msgs.len(), 5);
        let roles: Vec<Role> = msgs.iter().map(|m| m.role).collect();
        assert_eq!(
            roles,
            [
                Role::System,
                Role::Caller,
                Role::Callee,
                Role::Caller,
                Role::Callee
            ]
        );
        assert_eq!(msgs[4].content, "No.");
    }

    #[test]
    fn replaying_an_utterance_id_is_idempotent() {
        let mut h = ChatHistory::new("sys");
        h.push_caller("Hi").unwrap();
        let first = h.build_messages(7, "Hello").unwrap();
        let len = h.len();
        let again = h.build_messages(7, "Hello").unwrap();
        assert_eq!(first, again);
        assert_eq!(h.len(), len);
    }

    #[test]
    fn adjacent_callee_turns_are_rejected() {
        let mut h = ChatHistory::new("sys");
        h.build_messages(1, "Hello").unwrap();
        assert_eq!(
            h.build_messages(2, "Anyone there?"),
            Err(PromptError::OrderViolation(Role::Callee))
        );
        h.push_caller("Yes").unwrap();
        assert_eq!(
            h.push_caller("Still here"),
            Err(PromptError::OrderViolation(Role::Caller))
        );
    }

    #[test]
    fn token_estimate_never_decreases() {
        let mut h = ChatHistory::new("system prompt text");
        let mut last = h.estimated_tokens();
        for i in 0..10u64 {
            h.push_caller(format!("bot line {i}")).unwrap();
            assert!(h.estimated_tokens() >= last);
            last = h.estimated_tokens();
            h.build_messages(i, "ok").unwrap();
            assert!(h.estimated_tokens() >= last);
            last = h.estimated_tokens();
        }
    }
}
