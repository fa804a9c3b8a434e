use rand::Rng;
use rand_distr::{Distribution, LogNormal as LogNormalDist};
use serde::{Deserialize, Serialize};

use crate::domain::Millis;
use crate::error::InvariantViolation;

/// Log-normal latency described by its median and log-space standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormal {
    pub median: f64,
    pub dispersion: f64,
}

impl LogNormal {
    pub const fn new(median: f64, dispersion: f64) -> Self {
        Self { median, dispersion }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Millis {
        if self.dispersion <= 0.0 {
            return self.median.round() as Millis;
        }
        let dist = LogNormalDist::new(self.median.ln(), self.dispersion)
            .expect("validated log-normal parameters");
        dist.sample(rng).round() as Millis
    }
}

/// Per-stage latency distributions plus speaking rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyModel {
    pub stt_finalize_ms: LogNormal,
    pub llm_first_token_ms: LogNormal,
    pub llm_inter_token_ms: LogNormal,
    pub tts_first_chunk_ms: LogNormal,
    /// Pause before a simulated victim starts answering.
    pub victim_think_ms: LogNormal,
    pub speech_rate_chars_per_s: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            stt_finalize_ms: LogNormal::new(320.0, 0.35),
            llm_first_token_ms: LogNormal::new(620.0, 0.45),
            llm_inter_token_ms: LogNormal::new(22.0, 0.30),
            tts_first_chunk_ms: LogNormal::new(380.0, 0.35),
            victim_think_ms: LogNormal::new(700.0, 0.40),
            speech_rate_chars_per_s: 13.75,
        }
    }
}

impl LatencyModel {
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        for (name, d) in [
            ("stt_finalize_ms", self.stt_finalize_ms),
            ("llm_first_token_ms", self.llm_first_token_ms),
            ("llm_inter_token_ms", self.llm_inter_token_ms),
            ("tts_first_chunk_ms", self.tts_first_chunk_ms),
            ("victim_think_ms", self.victim_think_ms),
        ] {
            if !(d.median > 0.0) || !d.median.is_finite() {
                return Err(InvariantViolation::new(
                    format!("latency.{name}.median"),
                    "must be > 0",
                ));
            }
            if !(d.dispersion >= 0.0) || !d.dispersion.is_finite() {
                return Err(InvariantViolation::new(
                    format!("latency.{name}.dispersion"),
                    "must be >= 0",
                ));
            }
        }
        if !(self.speech_rate_chars_per_s > 0.0) {
            return Err(InvariantViolation::new(
                "latency.speech_rate_chars_per_s",
                "must be > 0",
            ));
        }
        Ok(())
    }

    /// Spoken length of `chars` characters.
    pub fn playback_ms(&self, chars: u64) -> Millis {
        (1000.0 * chars as f64 / self.speech_rate_chars_per_s).round() as Millis
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthTiming {
    pub first_chunk_delay_ms: Millis,
    pub playback_duration_ms: Millis,
    pub chars: u64,
}

/// Timing of synthesizing `text` in one go.
pub fn timing_synthesize<R: Rng + ?Sized>(
    text: &str,
    model: &LatencyModel,
    rng: &mut R,
) -> SynthTiming {
    let chars = text.chars().count() as u64;
    SynthTiming {
        first_chunk_delay_ms: if chars == 0 {
            0
        } else {
            model.tts_first_chunk_ms.sample(rng)
        },
        playback_duration_ms: model.playback_ms(chars),
        chars,
    }
}
