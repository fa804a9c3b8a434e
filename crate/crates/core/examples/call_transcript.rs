//! Places one simulated call and streams its wire events as JSON lines.
//!
//! cargo run --example call_transcript -- [persona] [level] [seed]

use vishsim::domain::{CallRequest, VictimProfile};
use vishsim::events::WireEvent;
use vishsim::pipeline::{mock_adapters, run_call};
use vishsim::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let persona = args.next().unwrap_or_else(|| "sophia".into());
    let level: u8 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(1);
    let seed: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(42);

    let config = Config::bundled("innovatech")?;
    let request = CallRequest {
        id: "demo-call".into(),
        persona_id: persona,
        victim: VictimProfile {
            name: "Erika".into(),
            phone: "sim:1".into(),
            discretion_level: level,
        },
        scenario_id: config.scenario.id.clone(),
        max_duration_s: config.pipeline.max_duration_s,
        seed,
        disposition: None,
    };
    let adapters = mock_adapters(&config, &request)?;
    let mut print = |e: WireEvent| println!("{}", e.to_json());
    let record = run_call(
        &request,
        &config.scenario,
        &config.pipeline,
        adapters,
        &mut print,
    )?;
    eprintln!(
        "{} after {:.1} s, {} bot turns",
        record.outcome.class.as_str(),
        record.usage.call_duration_s,
        record.playback_ms.len()
    );
    Ok(())
}
