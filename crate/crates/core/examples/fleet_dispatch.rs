//! Dispatches calls over simulated workers, two of which die mid-call.

use vishsim::fleet::harness::{run, HarnessConfig};

fn main() {
    let config = HarnessConfig::default();
    let report = run(&config);
    println!(
        "{} requests on {} workers, finished after {:.0} s of simulated time",
        config.requests,
        config.workers,
        report.finished_at as f64 / 1000.0
    );
    println!(
        "crashed workers: {:?}, calls requeued: {}",
        report.crashed_workers, report.requeued
    );
    println!(
        "every request served once: {}",
        report.all_served_exactly_once()
    );
    println!("double bookings: {}", report.double_bookings);
    println!("dispatch followed arrival order: {}", report.fifo());
}
