//! The single TOML configuration file: scenario, prices, latency, victim
//! policy and runtime knobs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapters::{DialogueRules, LatencyModel, VictimPolicy};
use crate::domain::{Scenario, DEFAULT_MAX_DURATION_S};
use crate::error::{ConfigError, InvariantViolation};
use crate::metering::PricingTable;
use crate::pipeline::BargeInPolicy;

const INNOVATECH: &str = include_str!("../fixtures/innovatech.toml");

/// Names of scenarios compiled into the library.
pub const BUNDLED: &[&str] = &["innovatech"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Silence after which the call is ended with a timeout.
    pub silence_timeout_ms: u64,
    pub max_duration_s: u64,
    pub barge_in: BargeInPolicy,
    /// How many refusals the scripted model accepts before deflecting.
    pub llm_persistence: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            silence_timeout_ms: 15_000,
            max_duration_s: DEFAULT_MAX_DURATION_S,
            barge_in: BargeInPolicy::Buffer,
            llm_persistence: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FleetConfig {
    pub workers: usize,
    pub poll_interval_ms: u64,
    /// Missed poll intervals before a worker is declared offline.
    pub offline_after_polls: u32,
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            workers: 4,
            poll_interval_ms: 1000,
            offline_after_polls: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub scenario: Scenario,
    #[serde(default)]
    pub pricing: PricingTable,
    #[serde(default)]
    pub latency: LatencyModel,
    #[serde(default)]
    pub victim_policy: VictimPolicy,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub fleet: FleetConfig,
    /// Optional victim dialogue rules, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dialogue_file: Option<PathBuf>,
    #[serde(skip)]
    pub dialogue: Option<DialogueRules>,
}

impl Config {
    /// Parses and validates a config from TOML text.
    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(src).map_err(|e| ConfigError::from_toml(src, e))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads a config file and any dialogue file it references.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let src = read(path)?;
        let mut config = Self::from_toml(&src)?;
        if let Some(file) = &config.dialogue_file {
            let full = path.parent().unwrap_or(Path::new(".")).join(file);
            config.dialogue = Some(DialogueRules::parse(&read(&full)?)?);
        }
        Ok(config)
    }

    /// A scenario shipped with the library.
    pub fn bundled(name: &str) -> Result<Self, ConfigError> {
        match name {
            "innovatech" => Self::from_toml(INNOVATECH),
            other => Err(ConfigError::UnknownScenario(other.to_string())),
        }
    }

    /// A bundled scenario name or a path to a config file.
    pub fn resolve(name_or_path: &str) -> Result<Self, ConfigError> {
        if BUNDLED.contains(&name_or_path) {
            Self::bundled(name_or_path)
        } else {
            Self::load(name_or_path)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), InvariantViolation> {
        self.scenario.validate()?;
        self.pricing.validate()?;
        self.latency.validate()?;
        self.victim_policy.validate()?;
        if self.pipeline.max_duration_s == 0 {
            return Err(InvariantViolation::new(
                "pipeline.max_duration_s",
                "must be > 0",
            ));
        }
        if self.pipeline.silence_timeout_ms == 0 {
            return Err(InvariantViolation::new(
                "pipeline.silence_timeout_ms",
                "must be > 0",
            ));
        }
        if self.fleet.workers == 0 {
            return Err(InvariantViolation::new("fleet.workers", "must be > 0"));
        }
        if self.fleet.poll_interval_ms == 0 {
            return Err(InvariantViolation::new(
                "fleet.poll_interval_ms",
                "must be > 0",
            ));
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads only the scenario part of a config file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ConfigError> {
    Config::load(path).map(|c| c.scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Intent;

    #[test]
    fn bundled_cast() {
        let c = Config::bundled("innovatech").unwrap();
        let malicious: Vec<&str> = c
            .scenario
            .personas
            .iter()
            .filter(|p| p.intent == Intent::Malicious)
            .map(|p| p.name.as_str())
            .collect();
        assert_eq!(malicious, ["Michael", "Sophia", "Samantha"]);
        let benign = c
            .scenario
            .personas
            .iter()
            .filter(|p| p.intent == Intent::Benign)
            .count();
        assert_eq!(benign, 2);
        assert_eq!(c.scenario.fact("password").unwrap().value, "Inn0V4t3CH");
        assert_eq!(c.scenario.fact("ssn").unwrap().value, "324125748");
        assert!(c.scenario.fact("ceo_phone").unwrap().fixture);
    }

    #[test]
    fn round_trip_is_identity() {
        let c = Config::bundled("innovatech").unwrap();
        let again = Config::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn empty_fact_list_is_rejected() {
        let mut c = Config::bundled("innovatech").unwrap();
        c.scenario.facts.clear();
        match Config::from_toml(&c.to_toml()) {
            Err(ConfigError::Invariant(v)) => assert_eq!(v.field, "facts"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let mut c = Config::bundled("innovatech").unwrap();
        let dup = c.scenario.facts[0].clone();
        c.scenario.facts.push(dup);
        assert!(matches!(
            Config::from_toml(&c.to_toml()),
            Err(ConfigError::Invariant(_))
        ));
    }

    #[test]
    fn parse_error_reports_line() {
        let src = "[scenario]\nid = \"x\"\ncompany = 3 3\n";
        match Config::from_toml(src) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dialogue_file_is_loaded_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Config::bundled("innovatech").unwrap();
        c.dialogue_file = Some("victim.rules".into());
        std::fs::write(dir.path().join("cfg.toml"), c.to_toml()).unwrap();
        std::fs::write(dir.path().join("victim.rules"), "hello => Yes?\n").unwrap();
        let loaded = Config::load(dir.path().join("cfg.toml")).unwrap();
        assert_eq!(loaded.dialogue.unwrap().rules().len(), 1);
    }

    #[test]
    fn unknown_bundle() {
        assert!(matches!(
            Config::bundled("acme"),
            Err(ConfigError::UnknownScenario(_))
        ));
    }
}
