use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::stats::{
    chi_squared, logistic_fit, quantile, ChiSquared, ContingencyTable, LogisticFit, StatsError,
};
use crate::domain::{CallRecord, OutcomeClass, Scenario};

pub const LEVELS: [u8; 4] = [1, 2, 3, 4];

/// Success (Disclosed) versus failure counts per discretion level 1..=4.
pub fn success_table(records: &[CallRecord]) -> Result<ContingencyTable, StatsError> {
    let mut rows = vec![vec![0u64; 2]; LEVELS.len()];
    for r in records {
        let level = usize::from(r.request.victim.discretion_level.clamp(1, 4)) - 1;
        let col = usize::from(r.outcome.class != OutcomeClass::Disclosed);
        rows[level][col] += 1;
    }
    ContingencyTable::new(rows)
}

/// Per-call mean response delay with quartiles and 1.5×IQR outliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySummary {
    /// `(call id, mean delay in ms)` for calls with at least one delay.
    pub per_call_mean_ms: Vec<(String, f64)>,
    pub q1_ms: f64,
    pub median_ms: f64,
    pub q3_ms: f64,
    pub lower_fence_ms: f64,
    pub upper_fence_ms: f64,
    pub outliers: Vec<String>,
}

impl DelaySummary {
    /// Share of calls whose mean delay is at most `limit_ms`.
    pub fn share_at_most(&self, limit_ms: f64) -> f64 {
        if self.per_call_mean_ms.is_empty() {
            return 0.0;
        }
        let n = self
            .per_call_mean_ms
            .iter()
            .filter(|(_, m)| *m <= limit_ms)
            .count();
        n as f64 / self.per_call_mean_ms.len() as f64
    }
}

fn mean(values: &[u64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<u64>() as f64 / values.len() as f64)
}

pub fn delay_summary(records: &[CallRecord]) -> DelaySummary {
    let per_call: Vec<(String, f64)> = records
        .iter()
        .filter_map(|r| mean(&r.delays_ms).map(|m| (r.request.id.clone(), m)))
        .collect();
    let mut sorted: Vec<f64> = per_call.iter().map(|(_, m)| *m).collect();
    sorted.sort_by(f64::total_cmp);
    let (q1, median, q3) = if sorted.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        (
            quantile(&sorted, 0.25),
            quantile(&sorted, 0.5),
            quantile(&sorted, 0.75),
        )
    };
    let iqr = q3 - q1;
    let (lower, upper) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let outliers = per_call
        .iter()
        .filter(|(_, m)| *m < lower || *m > upper)
        .map(|(id, _)| id.clone())
        .collect();
    DelaySummary {
        per_call_mean_ms: per_call,
        q1_ms: q1,
        median_ms: median,
        q3_ms: q3,
        lower_fence_ms: lower,
        upper_fence_ms: upper,
        outliers,
    }
}

/// Per-call mean playback length of bot utterances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaybackSummary {
    pub per_call_mean_ms: Vec<(String, f64)>,
    pub median_ms: f64,
}

impl PlaybackSummary {
    pub fn share_above(&self, limit_ms: f64) -> f64 {
        if self.per_call_mean_ms.is_empty() {
            return 0.0;
        }
        let n = self
            .per_call_mean_ms
            .iter()
            .filter(|(_, m)| *m > limit_ms)
            .count();
        n as f64 / self.per_call_mean_ms.len() as f64
    }
}

pub fn playback_summary(records: &[CallRecord]) -> PlaybackSummary {
    let per_call: Vec<(String, f64)> = records
        .iter()
        .filter_map(|r| mean(&r.playback_ms).map(|m| (r.request.id.clone(), m)))
        .collect();
    let mut sorted: Vec<f64> = per_call.iter().map(|(_, m)| *m).collect();
    sorted.sort_by(f64::total_cmp);
    let median_ms = if sorted.is_empty() {
        0.0
    } else {
        quantile(&sorted, 0.5)
    };
    PlaybackSummary {
        per_call_mean_ms: per_call,
        median_ms,
    }
}

/// Failure breakdown per target and level, success per level, and the tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub calls: usize,
    /// target fact → level → class → count
    pub breakdown: BTreeMap<String, BTreeMap<u8, BTreeMap<OutcomeClass, u64>>>,
    /// `[success, failure]` for levels 1..=4.
    pub success_by_level: Vec<[u64; 2]>,
    pub overall_success: f64,
    pub chi_squared: Option<ChiSquared>,
    pub logistic: Option<LogisticFit>,
    pub delays: DelaySummary,
    pub playback: PlaybackSummary,
}

impl OutcomeReport {
    pub fn build(records: &[CallRecord], scenario: &Scenario) -> Result<Self, StatsError> {
        let table = success_table(records)?;
        let mut breakdown: BTreeMap<String, BTreeMap<u8, BTreeMap<OutcomeClass, u64>>> =
            BTreeMap::new();
        for r in records {
            let target = scenario
                .persona(&r.request.persona_id)
                .and_then(|p| p.goal_key())
                .unwrap_or("unknown")
                .to_string();
            *breakdown
                .entry(target)
                .or_default()
                .entry(r.request.victim.discretion_level)
                .or_default()
                .entry(r.outcome.class)
                .or_default() += 1;
        }
        let success_by_level: Vec<[u64; 2]> = table.rows().iter().map(|r| [r[0], r[1]]).collect();
        let successes: u64 = success_by_level.iter().map(|r| r[0]).sum();
        let chi = table
            .without_empty_rows()
            .ok()
            .and_then(|t| chi_squared(&t).ok());
        let (x, y): (Vec<f64>, Vec<u8>) = records
            .iter()
            .map(|r| {
                (
                    f64::from(r.request.victim.discretion_level),
                    u8::from(r.outcome.class == OutcomeClass::Disclosed),
                )
            })
            .unzip();
        Ok(Self {
            calls: records.len(),
            breakdown,
            success_by_level,
            overall_success: successes as f64 / records.len() as f64,
            chi_squared: chi,
            logistic: logistic_fit(&x, &y).ok(),
            delays: delay_summary(records),
            playback: playback_summary(records),
        })
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (target, levels) in &self.breakdown {
            let _ = writeln!(out, "Outcomes for target `{target}`");
            let _ = write!(out, "{:<12}", "");
            for l in LEVELS {
                let _ = write!(out, "{:>8}", format!("L{l}"));
            }
            out.push('\n');
            for class in OutcomeClass::ALL {
                let _ = write!(out, "{:<12}", class.as_str());
                for l in LEVELS {
                    let n = levels
                        .get(&l)
                        .and_then(|m| m.get(&class))
                        .copied()
                        .unwrap_or(0);
                    let _ = write!(out, "{n:>8}");
                }
                out.push('\n');
            }
            out.push('\n');
        }
        let _ = writeln!(out, "Success per level");
        let _ = writeln!(
            out,
            "{:<8}{:>9}{:>9}{:>8}",
            "level", "success", "failure", "rate"
        );
        for (l, [s, f]) in LEVELS.iter().zip(&self.success_by_level) {
            let rate = if s + f > 0 {
                *s as f64 / (s + f) as f64 * 100.0
            } else {
                0.0
            };
            let _ = writeln!(out, "{l:<8}{s:>9}{f:>9}{rate:>7.1}%");
        }
        let _ = writeln!(
            out,
            "overall: {:.1}% of {} calls",
            self.overall_success * 100.0,
            self.calls
        );
        match &self.chi_squared {
            Some(c) => {
                let _ = writeln!(
                    out,
                    "chi-squared = {:.2}, dof = {}, p = {:.2e}",
                    c.statistic, c.dof, c.p_value
                );
            }
            None => out.push_str("chi-squared: not defined for this table\n"),
        }
        match &self.logistic {
            Some(f) => {
                let _ = writeln!(
                    out,
                    "logistic: intercept = {:.3}, slope per level = {:.3} (p = {:.2e})",
                    f.intercept, f.slope, f.slope_p
                );
            }
            None => out.push_str("logistic: not defined for this sample\n"),
        }
        let _ = writeln!(
            out,
            "response delay per call: Q1 {:.0} ms, median {:.0} ms, Q3 {:.0} ms, {} outliers",
            self.delays.q1_ms,
            self.delays.median_ms,
            self.delays.q3_ms,
            self.delays.outliers.len()
        );
        let _ = writeln!(
            out,
            "bot playback per call: median {:.1} s, {:.0}% of calls above 15 s",
            self.playback.median_ms / 1000.0,
            self.playback.share_above(15_000.0) * 100.0
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CallRequest, OutcomeRecord, UsageCounters, VictimProfile};

    fn rec(id: &str, level: u8, class: OutcomeClass, delays: Vec<u64>) -> CallRecord {
        CallRecord {
            request: CallRequest {
                id: id.into(),
                persona_id: "sophia".into(),
                victim: VictimProfile {
                    name: "V".into(),
                    phone: "sim:1".into(),
                    discretion_level: level,
                },
                scenario_id: "innovatech".into(),
                max_duration_s: 600,
                seed: 0,
                disposition: None,
            },
            prompt: String::new(),
            transcript: vec![],
            usage: UsageCounters::default(),
            outcome: OutcomeRecord {
                class,
                evidence: (class == OutcomeClass::Disclosed).then_some(0),
                annotated: false,
            },
            started_at: 0,
            ended_at: 0,
            delays_ms: delays,
            delay_breakdown: vec![],
            playback_ms: vec![],
        }
    }

    #[test]
    fn success_table_counts() {
        let rs = vec![
            rec("a", 1, OutcomeClass::Disclosed, vec![]),
            rec("b", 1, OutcomeClass::Refused, vec![]),
            rec("c", 4, OutcomeClass::Deferred, vec![]),
        ];
        let t = success_table(&rs).unwrap();
        assert_eq!(t.rows(), &[vec![1, 1], vec![0, 0], vec![0, 0], vec![0, 1]]);
        assert_eq!(success_table(&[]), Err(StatsError::EmptyTable));
    }

    #[test]
    fn delay_summary_basics() {
        let s = delay_summary(&[rec("a", 1, OutcomeClass::Refused, vec![2000, 2000])]);
        assert_eq!(s.per_call_mean_ms, vec![("a".to_string(), 2000.0)]);
        let same: Vec<CallRecord> = (0..5)
            .map(|i| rec(&i.to_string(), 1, OutcomeClass::Refused, vec![1500]))
            .collect();
        let s = delay_summary(&same);
        assert_eq!(s.q3_ms - s.q1_ms, 0.0);
        assert!(s.outliers.is_empty());
    }

    #[test]
    fn delay_outlier_flagged() {
        let mut rs: Vec<CallRecord> = (0..8)
            .map(|i| {
                rec(
                    &i.to_string(),
                    1,
                    OutcomeClass::Refused,
                    vec![1800 + 20 * i],
                )
            })
            .collect();
        rs.push(rec("slow", 1, OutcomeClass::Refused, vec![9000]));
        assert_eq!(delay_summary(&rs).outliers, vec!["slow".to_string()]);
    }
}
