use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AdapterError, LanguageModel, LatencyModel, StreamedToken, TokenStream};
use crate::domain::Persona;
use crate::prompt::{estimate_tokens, Message, Role};
use crate::text::{contains_phrase, normalize_for_match, DEFERRAL_MARKERS};

/// Deterministic stand-in for the language model.
///
/// Follows the persona's goal script: greeting, request, one follow-up, then
/// thanks + sentinel on success or a polite deflection + sentinel once the
/// victim has pushed back `persistence` times.
#[derive(Debug, Clone)]
pub struct ScriptedLlm {
    persona: Persona,
    goal_value: Option<String>,
    persistence: usize,
    latency: LatencyModel,
    rng: ChaCha8Rng,
    fail_on_request: Option<usize>,
    requests: usize,
}

impl ScriptedLlm {
    pub fn new(
        persona: Persona,
        goal_value: Option<String>,
        latency: LatencyModel,
        seed: u64,
    ) -> Self {
        Self {
            persona,
            goal_value,
            persistence: 2,
            latency,
            rng: ChaCha8Rng::seed_from_u64(seed),
            fail_on_request: None,
            requests: 0,
        }
    }

    pub fn with_persistence(mut self, persistence: usize) -> Self {
        self.persistence = persistence.max(1);
        self
    }

    /// Makes the n-th request (0-based) fail, for exercising the error path.
    pub fn failing_on(mut self, request: usize) -> Self {
        self.fail_on_request = Some(request);
        self
    }

    /// Picks the next utterance from the conversation so far (without sentinel).
    pub fn next_utterance(&mut self, messages: &[Message]) -> (String, bool) {
        let script = self.persona.script.clone();
        let caller_turns = messages.iter().filter(|m| m.role == Role::Caller).count();
        let callee: Vec<&str> = messages
            .iter()
            .filter(|m| m.role == Role::Callee)
            .map(|m| m.content.as_str())
            .collect();

        if caller_turns == 0 {
            let text = self.elaborate(&script.greeting);
            return (text, false);
        }
        if let Some(goal) = &self.goal_value {
            let heard = normalize_for_match(&callee.concat());
            if heard.contains(&normalize_for_match(goal)) {
                return (script.thanks.clone(), true);
            }
        }
        let last = callee.last().copied().unwrap_or_default();
        if DEFERRAL_MARKERS.iter().any(|m| contains_phrase(last, m)) {
            return (script.deflect.clone(), true);
        }
        // Replies after the first request that did not reach the goal.
        let pushbacks = callee.len().saturating_sub(1);
        if caller_turns == 1 {
            (self.elaborate(&script.request), false)
        } else if pushbacks >= self.persistence {
            (script.deflect.clone(), true)
        } else {
            (self.elaborate(&script.follow_up), false)
        }
    }

    fn elaborate(&mut self, base: &str) -> String {
        let extras = &self.persona.script.elaborations;
        if extras.is_empty() || !self.rng.random_bool(0.5) {
            return base.to_string();
        }
        let extra = &extras[self.rng.random_range(0..extras.len())];
        format!("{base} {extra}")
    }

    /// Splits text into random 1..=6 character fragments.
    fn tokenize(&mut self, text: &str) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let n = self.rng.random_range(1..=6usize).min(chars.len() - i);
            out.push(chars[i..i + n].iter().collect());
            i += n;
        }
        out
    }
}

impl LanguageModel for ScriptedLlm {
    fn stream_complete(&mut self, messages: &[Message]) -> Result<TokenStream, AdapterError> {
        let index = self.requests;
        self.requests += 1;
        if self.fail_on_request == Some(index) {
            return Err(AdapterError::LanguageModel("upstream returned 503".into()));
        }
        let (utterance, ends) = self.next_utterance(messages);
        let text = if ends {
            format!("{} {}", utterance, self.persona.eoc_sentinel)
        } else {
            utterance
        };
        let pieces = self.tokenize(&text);
        let mut at = self.latency.llm_first_token_ms.sample(&mut self.rng);
        let mut tokens = Vec::with_capacity(pieces.len());
        for (i, piece) in pieces.into_iter().enumerate() {
            if i > 0 {
                at += self.latency.llm_inter_token_ms.sample(&mut self.rng);
            }
            tokens.push(StreamedToken {
                text: piece,
                at_ms: at,
            });
        }
        let in_tokens = messages.iter().map(|m| estimate_tokens(&m.content)).sum();
        Ok(TokenStream {
            out_tokens: tokens.len() as u64,
            done_at_ms: at,
            tokens,
            in_tokens,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;

    fn sophia() -> ScriptedLlm {
        let cfg = Config::bundled("innovatech").unwrap();
        let persona = cfg.scenario.persona("sophia").unwrap().clone();
        ScriptedLlm::new(
            persona,
            Some("Inn0V4t3CH".into()),
            LatencyModel::default(),
            1,
        )
    }

    fn msgs(turns: &[(Role, &str)]) -> Vec<Message> {
        std::iter::once(Message::new(Role::System, "sys"))
            .chain(turns.iter().map(|(r, t)| Message::new(*r, *t)))
            .collect()
    }

    fn joined(stream: &TokenStream) -> String {
        stream.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn opening_introduces_persona() {
        let mut llm = sophia();
        let s = llm.stream_complete(&msgs(&[])).unwrap();
        let text = joined(&s);
        assert!(text.contains("this is Sophia"));
        assert!(!text.contains("<END_OF_CALL>"));
        assert_eq!(s.out_tokens, s.tokens.len() as u64);
        assert!(s.tokens.windows(2).all(|w| w[0].at_ms <= w[1].at_ms));
    }

    #[test]
    fn secret_in_history_ends_with_thanks_and_sentinel() {
        let mut llm = sophia();
        let m = msgs(&[
            (Role::Caller, "hi"),
            (Role::Callee, "hello"),
            (Role::Caller, "password?"),
            (Role::Callee, "it's inn0v4t3ch"),
        ]);
        let text = joined(&llm.stream_complete(&m).unwrap());
        assert!(text.starts_with("Perfect, thank you."));
        assert!(text.ends_with("<END_OF_CALL>"));
    }

    #[test]
    fn two_refusals_deflect_and_end() {
        let mut llm = sophia().with_persistence(2);
        let m = msgs(&[
            (Role::Caller, "hi"),
            (Role::Callee, "hello"),
            (Role::Caller, "password?"),
            (Role::Callee, "no"),
            (Role::Caller, "please?"),
            (Role::Callee, "still no"),
        ]);
        let text = joined(&llm.stream_complete(&m).unwrap());
        assert!(text.starts_with("That is completely fine"));
        assert!(text.ends_with("<END_OF_CALL>"));
    }

    #[test]
    fn single_refusal_gets_one_follow_up() {
        let mut llm = sophia();
        let m = msgs(&[
            (Role::Caller, "hi"),
            (Role::Callee, "hello"),
            (Role::Caller, "password?"),
            (Role::Callee, "no"),
        ]);
        let text = joined(&llm.stream_complete(&m).unwrap());
        assert!(text.starts_with("I understand, and it is good to be careful."));
    }

    #[test]
    fn deferral_ends_immediately() {
        let mut llm = sophia();
        let m = msgs(&[
            (Role::Caller, "hi"),
            (Role::Callee, "hello"),
            (Role::Caller, "password?"),
            (Role::Callee, "Let me transfer you to a colleague."),
        ]);
        assert!(joined(&llm.stream_complete(&m).unwrap()).ends_with("<END_OF_CALL>"));
    }

    #[test]
    fn injected_failure() {
        let mut llm = sophia().failing_on(0);
        assert!(llm.stream_complete(&msgs(&[])).is_err());
        assert!(llm.stream_complete(&msgs(&[])).is_ok());
    }

    #[test]
    fn input_tokens_track_message_size() {
        let mut llm = sophia();
        let short = llm.stream_complete(&msgs(&[])).unwrap().in_tokens;
        let long = llm
            .stream_complete(&msgs(&[
                (Role::Caller, "hello there"),
                (Role::Callee, "hi"),
            ]))
            .unwrap()
            .in_tokens;
        assert!(long > short);
    }
}
