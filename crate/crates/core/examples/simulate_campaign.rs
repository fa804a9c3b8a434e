//! Runs a four-level campaign on mock adapters and prints the outcome report.
//!
//! cargo run --example simulate_campaign -- [per_level] [seed]

use vishsim::analytics::OutcomeReport;
use vishsim::campaign::{simulate, CampaignSpec};
use vishsim::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let per_level = args.next().map(|a| a.parse()).transpose()?.unwrap_or(60);
    let seed = args.next().map(|a| a.parse()).transpose()?.unwrap_or(1);

    let config = Config::bundled("innovatech")?;
    let spec = CampaignSpec::new("demo", vec![1, 2, 3, 4], per_level, seed);
    let records = simulate(&config, &spec)?;
    let report = OutcomeReport::build(&records, &config.scenario)?;
    print!("{}", report.render_text());
    Ok(())
}
