//! What a successful attack costs, from reference per-call usage averages.

use vishsim::domain::UsageCounters;
use vishsim::metering::{amortized_number_cost, cost_of, cost_per_success, PricingTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pricing = PricingTable::default();
    let attack = UsageCounters {
        call_duration_s: 109.3,
        stt_audio_s: 27.7,
        tts_chars: 1397,
        llm_in_tokens: 1632,
        llm_out_tokens: 282,
    };
    let cost = cost_of(&attack, &pricing);
    println!("average attack call: {:.1} cent", cost.total_c);
    println!(
        "  transport {:.1}, stt {:.1}, tts {:.1}, llm in {:.1}, llm out {:.1}",
        cost.transport_c, cost.stt_c, cost.tts_c, cost.llm_in_c, cost.llm_out_c
    );

    // A reference total of 38.5 cent, at the best and worst per-level success rates.
    for rate in [0.77, 0.33] {
        println!(
            "success rate {:>3.0}%: {:.1} cent per success",
            rate * 100.0,
            cost_per_success(38.5, rate)?
        );
    }
    for calls in [100, 1000, 10_000] {
        println!(
            "phone number fee over {calls} calls a month: {:.3} cent per call",
            amortized_number_cost(pricing.transport_number_monthly_c, calls)?
        );
    }
    Ok(())
}
