//! Meters a simulated campaign and prints the average cost per call.

use vishsim::campaign::{simulate, CampaignSpec};
use vishsim::metering::CostReport;
use vishsim::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = Config::bundled("innovatech")?;
    let records = simulate(
        &config,
        &CampaignSpec::new("costs", vec![1, 2, 3, 4], 30, 7),
    )?;
    let report = CostReport::build(&records, &config.scenario, &config.pricing);
    print!("{}", report.render_text());
    Ok(())
}
