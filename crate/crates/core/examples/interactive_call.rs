//! Talk to a persona yourself. Each stdin line is one utterance; an empty
//! line or EOF hangs up.
//!
//! cargo run --example interactive_call -- [persona]

use std::io::BufRead;
use std::sync::mpsc;
use std::time::Duration;

use vishsim::adapters::{ChannelVictim, VictimInput};
use vishsim::domain::{CallRequest, EntryKind, Speaker, VictimProfile};
use vishsim::events::WireEvent;
use vishsim::pipeline::{adapters_with_callee, run_call};
use vishsim::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let persona = std::env::args().nth(1).unwrap_or_else(|| "sophia".into());
    let config = Config::bundled("innovatech")?;
    let request = CallRequest {
        id: "interactive".into(),
        persona_id: persona,
        victim: VictimProfile {
            name: "you".into(),
            phone: "sim:0".into(),
            discretion_level: 1,
        },
        scenario_id: config.scenario.id.clone(),
        max_duration_s: config.pipeline.max_duration_s,
        seed: 1,
        disposition: None,
    };

    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for line in std::io::stdin().lock().lines() {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                break;
            }
            if tx.send(VictimInput::Utterance(line)).is_err() {
                return;
            }
        }
        let _ = tx.send(VictimInput::Hangup);
    });

    let callee = ChannelVictim::new(rx, Duration::from_secs(120));
    let adapters = adapters_with_callee(&config, &request, Box::new(callee))?;
    let mut show = |e: WireEvent| {
        if let WireEvent::Transcript {
            speaker: Speaker::Bot,
            text,
            kind: EntryKind::Utterance,
            ..
        } = e
        {
            println!("caller: {text}");
        }
    };
    let record = run_call(
        &request,
        &config.scenario,
        &config.pipeline,
        adapters,
        &mut show,
    )?;
    println!("-- call ended: {}", record.outcome.class.as_str());
    Ok(())
}
