//! Campaign planning and offline simulation.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapters::decide_disposition;
use crate::config::Config;
use crate::domain::{CallRecord, CallRequest, Disposition, Intent, VictimProfile};
use crate::error::InvariantViolation;
use crate::events::NullSink;
use crate::pipeline::{mock_adapters_shared, run_call, CallError};

/// How victim decisions are drawn across a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Each level gets `round(p · n)` disclosers, spread in random order.
    #[default]
    Quota,
    /// Every victim decides independently with probability `p`.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub id: String,
    pub levels: Vec<u8>,
    pub per_level: usize,
    pub seed: u64,
    /// Personas to rotate through; empty means every malicious persona.
    #[serde(default)]
    pub personas: Vec<String>,
    #[serde(default)]
    pub sampling: Sampling,
}

impl CampaignSpec {
    pub fn new(id: impl Into<String>, levels: Vec<u8>, per_level: usize, seed: u64) -> Self {
        Self {
            id: id.into(),
            levels,
            per_level,
            seed,
            personas: Vec::new(),
            sampling: Sampling::Quota,
        }
    }
}

/// Expands a campaign into call requests, in level order.
pub fn plan_campaign(config: &Config, spec: &CampaignSpec) -> Result<Vec<CallRequest>, CallError> {
    let scenario = &config.scenario;
    if spec.levels.is_empty() {
        return Err(InvariantViolation::new("levels", "at least one level is required").into());
    }
    if let Some(bad) = spec.levels.iter().find(|l| !(1..=4).contains(*l)) {
        return Err(InvariantViolation::new("levels", format!("{bad} is not in 1..=4")).into());
    }
    let personas: Vec<&str> = if spec.personas.is_empty() {
        scenario
            .personas
            .iter()
            .filter(|p| p.intent == Intent::Malicious)
            .map(|p| p.id.as_str())
            .collect()
    } else {
        spec.personas.iter().map(String::as_str).collect()
    };
    if let Some(missing) = personas.iter().find(|p| scenario.persona(p).is_none()) {
        return Err(CallError::UnknownPersona(missing.to_string()));
    }
    if personas.is_empty() {
        return Err(InvariantViolation::new("personas", "no persona to call with").into());
    }

    // Non-disclosers still draw how they fail.
    let mut failure_only = config.victim_policy.clone();
    failure_only.disclose_prob = [0.0; 4];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut requests = Vec::with_capacity(spec.levels.len() * spec.per_level);
    for &level in &spec.levels {
        let p = config.victim_policy.disclose_prob(level);
        let disclosers = match spec.sampling {
            Sampling::Quota => {
                let k = (p * spec.per_level as f64).round() as usize;
                let mut mask: Vec<bool> = (0..spec.per_level).map(|i| i < k).collect();
                mask.shuffle(&mut rng);
                Some(mask)
            }
            Sampling::Independent => None,
        };
        let name = scenario
            .victims
            .iter()
            .find(|v| v.discretion_level == level)
            .map(|v| v.name.clone());
        for i in 0..spec.per_level {
            let persona = personas[i % personas.len()];
            let seed: u64 = rng.random();
            let disposition = disclosers.as_ref().map(|mask| {
                if mask[i] {
                    Disposition::Disclose
                } else {
                    let target = scenario
                        .persona(persona)
                        .and_then(|p| p.goal_key())
                        .unwrap_or("default");
                    decide_disposition(&failure_only, level, target, &mut rng)
                }
            });
            requests.push(CallRequest {
                id: format!("{}-L{level}-{:03}", spec.id, i + 1),
                persona_id: persona.to_string(),
                victim: VictimProfile {
                    name: name
                        .clone()
                        .unwrap_or_else(|| format!("Participant {}", i + 1)),
                    phone: format!("sim:{}{:03}", level, i + 1),
                    discretion_level: level,
                },
                scenario_id: scenario.id.clone(),
                max_duration_s: config.pipeline.max_duration_s,
                seed,
                disposition,
            });
        }
    }
    Ok(requests)
}

/// Plans and runs a whole campaign on mock adapters. Deterministic per seed.
pub fn simulate(config: &Config, spec: &CampaignSpec) -> Result<Vec<CallRecord>, CallError> {
    let scenario = Arc::new(config.scenario.clone());
    plan_campaign(config, spec)?
        .iter()
        .map(|request| {
            let adapters = mock_adapters_shared(config, scenario.clone(), request)?;
            run_call(
                request,
                &config.scenario,
                &config.pipeline,
                adapters,
                &mut NullSink,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_shape() {
        let config = Config::bundled("innovatech").unwrap();
        let spec = CampaignSpec::new("c", vec![1, 2, 3, 4], 60, 7);
        let plan = plan_campaign(&config, &spec).unwrap();
        assert_eq!(plan.len(), 240);
        let disclosers: Vec<usize> = [1u8, 2, 3, 4]
            .iter()
            .map(|&l| {
                plan.iter()
                    .filter(|r| {
                        r.victim.discretion_level == l
                            && r.disposition == Some(Disposition::Disclose)
                    })
                    .count()
            })
            .collect();
        assert_eq!(disclosers, [46, 35, 23, 20]);
        let ids: std::collections::BTreeSet<&str> = plan.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids.len(), 240);
    }

    #[test]
    fn independent_sampling_leaves_decision_to_victim() {
        let config = Config::bundled("innovatech").unwrap();
        let mut spec = CampaignSpec::new("c", vec![2], 10, 1);
        spec.sampling = Sampling::Independent;
        assert!(plan_campaign(&config, &spec)
            .unwrap()
            .iter()
            .all(|r| r.disposition.is_none()));
    }

    #[test]
    fn rejects_bad_levels_and_personas() {
        let config = Config::bundled("innovatech").unwrap();
        assert!(plan_campaign(&config, &CampaignSpec::new("c", vec![5], 1, 1)).is_err());
        let mut spec = CampaignSpec::new("c", vec![1], 1, 1);
        spec.personas = vec!["nobody".into()];
        assert!(matches!(
            plan_campaign(&config, &spec),
            Err(CallError::UnknownPersona(_))
        ));
    }
}
