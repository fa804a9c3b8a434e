use vishsim::adapters::{
    Adapters, Callee, LatencyModel, MockRecognizer, MockSynthesizer, MockTransport, ScriptedLlm,
    VictimTurn,
};
use vishsim::domain::{CallRequest, Disposition, EntryKind, Speaker, VictimProfile};
use vishsim::events::WireEvent;
use vishsim::pipeline::{adapters_with_callee, run_call, secrets_for, simulate_call, CallError};
use vishsim::{Config, OutcomeClass};

fn config() -> Config {
    Config::bundled("innovatech").unwrap()
}

fn request(persona: &str, level: u8, seed: u64, disposition: Option<Disposition>) -> CallRequest {
    CallRequest {
        id: format!("t-{persona}-{seed}"),
        persona_id: persona.into(),
        victim: VictimProfile {
            name: "Erika".into(),
            phone: "sim:1".into(),
            discretion_level: level,
        },
        scenario_id: "innovatech".into(),
        max_duration_s: 600,
        seed,
        disposition,
    }
}

/// Answers every question at length but never gives anything away.
struct Chatty;

impl Callee for Chatty {
    fn respond(&mut self, _bot_said: &str) -> VictimTurn {
        VictimTurn {
            text: Some("Hmm, interesting, tell me a bit more about that first.".into()),
            hangup: false,
        }
    }
}

struct Mute;

impl Callee for Mute {
    fn respond(&mut self, _bot_said: &str) -> VictimTurn {
        VictimTurn {
            text: None,
            hangup: false,
        }
    }
}

#[test]
fn same_seed_gives_byte_identical_records() {
    let c = config();
    for seed in 0..20 {
        let r = request("sophia", 1 + (seed % 4) as u8, seed, None);
        let a = serde_json::to_string(&simulate_call(&c, &r).unwrap()).unwrap();
        let b = serde_json::to_string(&simulate_call(&c, &r).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn disclosing_victim_is_classified_disclosed() {
    let c = config();
    for persona in ["michael", "sophia", "samantha"] {
        let rec = simulate_call(&c, &request(persona, 1, 3, Some(Disposition::Disclose))).unwrap();
        assert_eq!(rec.outcome.class, OutcomeClass::Disclosed, "{persona}");
        let i = rec.outcome.evidence.unwrap();
        assert_eq!(rec.transcript[i].speaker, Speaker::Victim);
        let terminal = rec.terminal().unwrap();
        assert_eq!(
            (terminal.speaker, terminal.kind),
            (Speaker::Bot, EntryKind::Hangup)
        );
        assert!(rec
            .transcript
            .iter()
            .any(|e| e.kind == EntryKind::SentinelDetected));
        assert!(rec
            .bot_utterances()
            .all(|e| !e.text.contains("<END_OF_CALL>")));
        rec.validate().unwrap();
    }
}

#[test]
fn refusing_and_deferring_victims() {
    let c = config();
    let refused = simulate_call(&c, &request("sophia", 4, 9, Some(Disposition::Refuse))).unwrap();
    assert_eq!(refused.outcome.class, OutcomeClass::Refused);
    let deferred = simulate_call(&c, &request("sophia", 4, 9, Some(Disposition::Defer))).unwrap();
    assert_eq!(deferred.outcome.class, OutcomeClass::Deferred);
    let wrong = simulate_call(&c, &request("sophia", 4, 9, Some(Disposition::WrongInfo))).unwrap();
    assert_eq!(wrong.outcome.class, OutcomeClass::WrongInfo);
}

#[test]
fn silent_victim_times_out() {
    let c = config();
    let r = request("sophia", 2, 1, None);
    let adapters = adapters_with_callee(&c, &r, Box::new(Mute)).unwrap();
    let rec = run_call(
        &r,
        &c.scenario,
        &c.pipeline,
        adapters,
        &mut vishsim::events::NullSink,
    )
    .unwrap();
    assert_eq!(rec.outcome.class, OutcomeClass::Timeout);
    assert_eq!(rec.terminal().unwrap().kind, EntryKind::Timeout);
    assert!(rec.usage.stt_audio_s == 0.0);
}

#[test]
fn endless_conversation_stops_at_the_cap() {
    let mut c = config();
    c.pipeline.llm_persistence = 1000;
    let r = request("michael", 2, 5, None);
    let adapters = adapters_with_callee(&c, &r, Box::new(Chatty)).unwrap();
    let rec = run_call(
        &r,
        &c.scenario,
        &c.pipeline,
        adapters,
        &mut vishsim::events::NullSink,
    )
    .unwrap();
    assert_eq!(rec.ended_at, 600_000);
    assert_eq!(rec.outcome.class, OutcomeClass::Timeout);
    assert!(rec.transcript.iter().all(|e| e.t_ms <= 600_000));
}

#[test]
fn model_failure_is_a_bug() {
    let c = config();
    let r = request("sophia", 1, 2, None);
    let persona = c.scenario.persona("sophia").unwrap().clone();
    let latency = LatencyModel::default();
    let mut adapters = adapters_with_callee(&c, &r, Box::new(Chatty)).unwrap();
    adapters.llm = Box::new(ScriptedLlm::new(persona, None, latency, 1).failing_on(1));
    let rec = run_call(
        &r,
        &c.scenario,
        &c.pipeline,
        adapters,
        &mut vishsim::events::NullSink,
    )
    .unwrap();
    assert_eq!(rec.outcome.class, OutcomeClass::Bug);
    assert!(rec.transcript.iter().any(|e| e.kind == EntryKind::Error));
}

#[test]
fn failed_dial_is_a_bug() {
    let c = config();
    let r = request("sophia", 1, 2, None);
    let latency = LatencyModel::default();
    let persona = c.scenario.persona("sophia").unwrap().clone();
    let adapters = Adapters {
        transport: Box::new(MockTransport::new(Box::new(Mute), latency, 1).failing_dial()),
        recognizer: Box::new(MockRecognizer::new(latency, 2)),
        llm: Box::new(ScriptedLlm::new(persona, None, latency, 3)),
        synthesizer: Box::new(MockSynthesizer::new(latency, 4)),
    };
    let rec = run_call(
        &r,
        &c.scenario,
        &c.pipeline,
        adapters,
        &mut vishsim::events::NullSink,
    )
    .unwrap();
    assert_eq!(rec.outcome.class, OutcomeClass::Bug);
    assert_eq!(rec.usage.llm_in_tokens, 0);
}

#[test]
fn request_errors() {
    let c = config();
    let mut r = request("sophia", 1, 2, None);
    r.scenario_id = "other".into();
    assert!(matches!(
        simulate_call(&c, &r),
        Err(CallError::ScenarioMismatch { .. })
    ));
    let r = request("nobody", 1, 2, None);
    assert!(matches!(
        simulate_call(&c, &r),
        Err(CallError::UnknownPersona(_))
    ));
    let mut r = request("sophia", 1, 2, None);
    r.victim.discretion_level = 9;
    assert!(matches!(simulate_call(&c, &r), Err(CallError::Invalid(_))));
}

#[test]
fn wire_events_mirror_the_record() {
    let c = config();
    let r = request("samantha", 1, 4, Some(Disposition::Disclose));
    let adapters = vishsim::pipeline::mock_adapters(&c, &r).unwrap();
    let mut events = Vec::new();
    let mut sink = |e: WireEvent| events.push(e);
    let rec = run_call(&r, &c.scenario, &c.pipeline, adapters, &mut sink).unwrap();

    assert!(events.iter().all(|e| e.call_id() == r.id));
    assert!(events.windows(2).all(|w| w[0].t_ms() <= w[1].t_ms()));
    assert!(events.last().unwrap().is_outcome());
    assert!(matches!(events[events.len() - 2], WireEvent::Usage { .. }));

    let delays: Vec<u64> = events
        .iter()
        .filter_map(|e| match e {
            WireEvent::Delay { total_ms, .. } => Some(*total_ms),
            _ => None,
        })
        .collect();
    assert_eq!(delays, rec.delays_ms);

    let bot: Vec<(&str, Option<u64>)> = events
        .iter()
        .filter_map(|e| match e {
            WireEvent::Transcript {
                speaker: Speaker::Bot,
                text,
                kind: EntryKind::Utterance,
                playback_ms,
                ..
            } => Some((text.as_str(), *playback_ms)),
            _ => None,
        })
        .collect();
    let expected: Vec<(&str, Option<u64>)> = rec
        .bot_utterances()
        .map(|e| e.text.as_str())
        .zip(rec.playback_ms.iter().map(|&p| Some(p)))
        .collect();
    assert_eq!(bot, expected);
}

#[test]
fn usage_is_consistent_with_the_transcript() {
    let c = config();
    for seed in 0..30 {
        let rec = simulate_call(&c, &request("michael", 1 + (seed % 4) as u8, seed, None)).unwrap();
        rec.validate().unwrap();
        let spoken: u64 = rec
            .bot_utterances()
            .map(|e| e.text.chars().count() as u64 + 1)
            .sum();
        assert!(rec.usage.tts_chars >= spoken.saturating_sub(rec.bot_utterances().count() as u64));
        assert!(rec.usage.llm_in_tokens > 0 && rec.usage.llm_out_tokens > 0);
        assert_eq!(rec.delays_ms.len(), rec.delay_breakdown.len());
        for b in &rec.delay_breakdown {
            assert_eq!(b.stt_ms + b.llm_ms + b.tts_ms, b.total_ms);
        }
        let secrets = secrets_for(&c.scenario, "michael");
        assert_eq!(secrets[0].0, "ceo_phone");
    }
}
