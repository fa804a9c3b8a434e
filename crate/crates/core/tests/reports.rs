use vishsim::analytics::{annotate, OutcomeReport};
use vishsim::campaign::{simulate, CampaignSpec};
use vishsim::log::{read_records, LogError, RecordLog};
use vishsim::metering::{CostReport, PricingTable};
use vishsim::{Config, OutcomeClass};

fn campaign(per_level: usize, seed: u64) -> (Config, Vec<vishsim::CallRecord>) {
    let c = Config::bundled("innovatech").unwrap();
    let records = simulate(
        &c,
        &CampaignSpec::new("r", vec![1, 2, 3, 4], per_level, seed),
    )
    .unwrap();
    (c, records)
}

#[test]
fn log_round_trip_and_append() {
    let (_, records) = campaign(3, 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("calls.jsonl");
    {
        let mut log = RecordLog::create(&path).unwrap();
        for r in &records[..6] {
            log.append(r).unwrap();
        }
    }
    {
        let mut log = RecordLog::open(&path).unwrap();
        for r in &records[6..] {
            log.append(r).unwrap();
        }
    }
    assert_eq!(read_records(&path).unwrap(), records);
}

#[test]
fn corrupt_line_is_reported_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(&path, "\n{\"nope\": 1}\n").unwrap();
    match read_records(&path) {
        Err(LogError::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(matches!(
        read_records(dir.path().join("missing")),
        Err(LogError::Io { .. })
    ));
}

#[test]
fn reports_from_a_simulated_campaign() {
    let (c, records) = campaign(20, 3);
    let costs = CostReport::build(&records, &c.scenario, &PricingTable::default());
    assert_eq!(costs.columns.len(), 3);
    assert_eq!(costs.columns[0].calls, 80);
    assert_eq!(costs.columns[1].calls, 80);
    let successes = records
        .iter()
        .filter(|r| r.outcome.class == OutcomeClass::Disclosed)
        .count();
    assert_eq!(costs.columns[2].calls, successes);
    for col in &costs.columns {
        let b = col.cost;
        assert!(
            (b.total_c - (b.transport_c + b.stt_c + b.tts_c + b.llm_in_c + b.llm_out_c)).abs()
                < 1e-9
        );
    }
    assert!(costs.render_text().contains("Total (cent)"));

    let outcomes = OutcomeReport::build(&records, &c.scenario).unwrap();
    assert_eq!(outcomes.calls, 80);
    let total: u64 = outcomes
        .breakdown
        .values()
        .flat_map(|l| l.values())
        .flat_map(|m| m.values())
        .sum();
    assert_eq!(total, 80);
    assert!(outcomes.chi_squared.is_some());
    let text = outcomes.render_text();
    assert!(text.contains("Success per level"));

    let json = serde_json::to_string(&outcomes).unwrap();
    let back: OutcomeReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back.success_by_level, outcomes.success_by_level);
}

#[test]
fn annotation_overrides_the_classifier() {
    let (c, mut records) = campaign(1, 2);
    let r = &mut records[0];
    annotate(r, OutcomeClass::Bug, None);
    let again = vishsim::analytics::classify_outcome(
        r,
        &vishsim::pipeline::secrets_for(&c.scenario, &r.request.persona_id),
    );
    assert_eq!(again.class, OutcomeClass::Bug);
    assert!(again.annotated);
}
