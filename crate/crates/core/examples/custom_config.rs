//! Loads the bundled configuration, tweaks it, and checks what changed.

use vishsim::analytics::delay_summary;
use vishsim::campaign::{simulate, CampaignSpec};
use vishsim::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = Config::bundled("innovatech")?;
    // Round-trip through TOML, as a user editing a copy of the file would.
    let mut slow = Config::from_toml(&base.to_toml())?;
    slow.latency.llm_first_token_ms.median *= 2.0;
    slow.pipeline.silence_timeout_ms = 8_000;
    slow.validate()?;

    let spec = CampaignSpec::new("cfg", vec![1, 2, 3, 4], 15, 5);
    for (name, config) in [("bundled", &base), ("slow model", &slow)] {
        let d = delay_summary(&simulate(config, &spec)?);
        println!(
            "{name:>10}: median response delay {:.0} ms, Q3 {:.0} ms",
            d.median_ms, d.q3_ms
        );
    }
    Ok(())
}
