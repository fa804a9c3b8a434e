//! Money. Everything is in US cents as `f64`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CallRecord, OutcomeClass, Scenario, UsageCounters};
use crate::error::InvariantViolation;

/// Provider list prices, January 2024.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PricingTable {
    pub transport_per_min_c: f64,
    pub transport_number_monthly_c: f64,
    pub stt_per_min_c: f64,
    pub llm_in_per_1k_c: f64,
    pub llm_out_per_1k_c: f64,
    pub tts_per_500k_chars_c: f64,
    pub compute_per_hour_c: f64,
}

impl Default for PricingTable {
    fn default() -> Self {
        Self {
            transport_per_min_c: 1.4,
            transport_number_monthly_c: 115.0,
            stt_per_min_c: 2.4,
            llm_in_per_1k_c: 1.0,
            llm_out_per_1k_c: 3.0,
            tts_per_500k_chars_c: 9900.0,
            compute_per_hour_c: 3.0,
        }
    }
}

impl PricingTable {
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        for (name, v) in [
            ("transport_per_min_c", self.transport_per_min_c),
            (
                "transport_number_monthly_c",
                self.transport_number_monthly_c,
            ),
            ("stt_per_min_c", self.stt_per_min_c),
            ("llm_in_per_1k_c", self.llm_in_per_1k_c),
            ("llm_out_per_1k_c", self.llm_out_per_1k_c),
            ("tts_per_500k_chars_c", self.tts_per_500k_chars_c),
            ("compute_per_hour_c", self.compute_per_hour_c),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(InvariantViolation::new(
                    format!("pricing.{name}"),
                    "must be >= 0",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub transport_c: f64,
    pub stt_c: f64,
    pub tts_c: f64,
    pub llm_in_c: f64,
    pub llm_out_c: f64,
    pub total_c: f64,
}

impl CostBreakdown {
    fn from_parts(transport_c: f64, stt_c: f64, tts_c: f64, llm_in_c: f64, llm_out_c: f64) -> Self {
        Self {
            transport_c,
            stt_c,
            tts_c,
            llm_in_c,
            llm_out_c,
            total_c: transport_c + stt_c + tts_c + llm_in_c + llm_out_c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MeteringError {
    #[error("calls per month must be at least 1")]
    ZeroCalls,
    #[error("success rate must be in (0, 1]")]
    NonPositiveRate,
}

/// Cost of one call. Telephony is billed per started minute.
pub fn cost_of(usage: &UsageCounters, pricing: &PricingTable) -> CostBreakdown {
    let minutes = (usage.call_duration_s / 60.0).ceil().max(0.0);
    CostBreakdown::from_parts(
        minutes * pricing.transport_per_min_c,
        usage.stt_audio_s / 60.0 * pricing.stt_per_min_c,
        usage.tts_chars as f64 * pricing.tts_per_500k_chars_c / 500_000.0,
        usage.llm_in_tokens as f64 * pricing.llm_in_per_1k_c / 1000.0,
        usage.llm_out_tokens as f64 * pricing.llm_out_per_1k_c / 1000.0,
    )
}

/// Informational compute cost; not part of `total_c`.
pub fn compute_cost(usage: &UsageCounters, pricing: &PricingTable) -> f64 {
    usage.call_duration_s / 3600.0 * pricing.compute_per_hour_c
}

/// Share of the monthly phone-number fee carried by each call.
pub fn amortized_number_cost(
    monthly_fee_c: f64,
    calls_per_month: u64,
) -> Result<f64, MeteringError> {
    if calls_per_month == 0 {
        return Err(MeteringError::ZeroCalls);
    }
    Ok(monthly_fee_c / calls_per_month as f64)
}

/// Expected spend per successful attack.
pub fn cost_per_success(avg_call_cost_c: f64, success_rate: f64) -> Result<f64, MeteringError> {
    if !(success_rate > 0.0 && success_rate <= 1.0) {
        return Err(MeteringError::NonPositiveRate);
    }
    Ok(avg_call_cost_c / success_rate)
}

/// Mean usage over a set of calls.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UsageAverages {
    pub call_duration_s: f64,
    pub stt_audio_s: f64,
    pub tts_chars: f64,
    pub llm_in_tokens: f64,
    pub llm_out_tokens: f64,
}

/// One column of the cost report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostColumn {
    pub label: String,
    pub calls: usize,
    pub usage: UsageAverages,
    /// Per-call costs averaged, so transport is a mean of per-call ceilings.
    pub cost: CostBreakdown,
    pub compute_c: f64,
}

impl CostColumn {
    pub fn from_records<'a>(
        label: &str,
        records: impl IntoIterator<Item = &'a CallRecord>,
        pricing: &PricingTable,
    ) -> Self {
        let mut n = 0usize;
        let mut u = UsageAverages::default();
        let mut c = CostBreakdown::default();
        let mut compute = 0.0;
        for r in records {
            n += 1;
            u.call_duration_s += r.usage.call_duration_s;
            u.stt_audio_s += r.usage.stt_audio_s;
            u.tts_chars += r.usage.tts_chars as f64;
            u.llm_in_tokens += r.usage.llm_in_tokens as f64;
            u.llm_out_tokens += r.usage.llm_out_tokens as f64;
            let k = cost_of(&r.usage, pricing);
            c.transport_c += k.transport_c;
            c.stt_c += k.stt_c;
            c.tts_c += k.tts_c;
            c.llm_in_c += k.llm_in_c;
            c.llm_out_c += k.llm_out_c;
            compute += compute_cost(&r.usage, pricing);
        }
        if n > 0 {
            let d = n as f64;
            u = UsageAverages {
                call_duration_s: u.call_duration_s / d,
                stt_audio_s: u.stt_audio_s / d,
                tts_chars: u.tts_chars / d,
                llm_in_tokens: u.llm_in_tokens / d,
                llm_out_tokens: u.llm_out_tokens / d,
            };
            c = CostBreakdown::from_parts(
                c.transport_c / d,
                c.stt_c / d,
                c.tts_c / d,
                c.llm_in_c / d,
                c.llm_out_c / d,
            );
            compute /= d;
        }
        Self {
            label: label.to_string(),
            calls: n,
            usage: u,
            cost: c,
            compute_c: compute,
        }
    }
}

/// Average usage and cost for all calls, attack calls and successful attacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub columns: Vec<CostColumn>,
    pub number_per_call_c: f64,
}

impl CostReport {
    /// Attack calls are those placed by a malicious persona of `scenario`.
    pub fn build(records: &[CallRecord], scenario: &Scenario, pricing: &PricingTable) -> Self {
        let attack: Vec<&CallRecord> = records
            .iter()
            .filter(|r| {
                scenario
                    .persona(&r.request.persona_id)
                    .is_some_and(|p| p.intent == crate::domain::Intent::Malicious)
            })
            .collect();
        let successful: Vec<&CallRecord> = attack
            .iter()
            .copied()
            .filter(|r| r.outcome.class == OutcomeClass::Disclosed)
            .collect();
        let number_per_call_c = amortized_number_cost(
            pricing.transport_number_monthly_c,
            records.len().max(1) as u64,
        )
        .expect("at least one call");
        Self {
            columns: vec![
                CostColumn::from_records("all", records, pricing),
                CostColumn::from_records("attack", attack, pricing),
                CostColumn::from_records("successful", successful, pricing),
            ],
            number_per_call_c,
        }
    }

    pub fn render_text(&self) -> String {
        type Row = (&'static str, fn(&CostColumn) -> f64);
        let rows: [Row; 13] = [
            ("Calls", |c| c.calls as f64),
            ("Call duration (s)", |c| c.usage.call_duration_s),
            ("Transport (cent)", |c| c.cost.transport_c),
            ("STT audio (s)", |c| c.usage.stt_audio_s),
            ("STT (cent)", |c| c.cost.stt_c),
            ("TTS (chars)", |c| c.usage.tts_chars),
            ("TTS (cent)", |c| c.cost.tts_c),
            ("LLM in (tok)", |c| c.usage.llm_in_tokens),
            ("LLM in (cent)", |c| c.cost.llm_in_c),
            ("LLM out (tok)", |c| c.usage.llm_out_tokens),
            ("LLM out (cent)", |c| c.cost.llm_out_c),
            ("Total (cent)", |c| c.cost.total_c),
            ("Compute, info only (cent)", |c| c.compute_c),
        ];
        let mut out = format!("{:<28}", "");
        for c in &self.columns {
            let _ = write!(out, "{:>12}", c.label);
        }
        out.push('\n');
        for (name, get) in rows {
            let _ = write!(out, "{name:<28}");
            for c in &self.columns {
                if name == "Calls" {
                    let _ = write!(out, "{:>12}", c.calls);
                } else {
                    let _ = write!(out, "{:>12.1}", get(c));
                }
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "Phone number share per call: {:.2} cent",
            self.number_per_call_c
        );
        out
    }
}
