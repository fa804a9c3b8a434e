//! Appends call records to a log file, reads them back and summarizes them.

use vishsim::analytics::OutcomeReport;
use vishsim::campaign::{simulate, CampaignSpec};
use vishsim::log::{read_records, RecordLog};
use vishsim::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = Config::bundled("innovatech")?;
    let path = std::env::temp_dir().join("vishsim-example.jsonl");
    let mut log = RecordLog::create(&path)?;
    for record in simulate(&config, &CampaignSpec::new("log", vec![1, 4], 10, 3))? {
        log.append(&record)?;
    }
    let records = read_records(&path)?;
    println!("{} records in {}", records.len(), path.display());
    print!(
        "{}",
        OutcomeReport::build(&records, &config.scenario)?.render_text()
    );
    Ok(())
}
