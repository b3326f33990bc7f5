//! Experiment configuration.
//!
//! An [`ExperimentConfig`] carries every physical and protocol parameter of a
//! run: source intensities and their selection probabilities, basis choice,
//! fiber arms, detector model, run length, post-processing knobs and the
//! single seed from which all randomness is derived.
//!
//! Config files are flat `key = value` text (TOML) or the equivalent JSON
//! object. Unknown keys are rejected. The built-in preset `paper-50km`
//! describes the 2 x 25 km time-bin experiment.
//!
//! # Dark counts
//!
//! Detectors are characterised by a per-gate dark-count probability. A
//! free-running detector with dark-count rate `r` observed through a
//! detection window of width `w` has `p_d = r * w`; the preset uses
//! 1 kHz over a 2 ns window (the optical pulse width), giving `p_d = 2e-6`
//! per detector per time bin.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Number of intensity settings per party.
pub const NUM_INTENSITIES: usize = 4;

/// Name of the built-in preset for the 50 km experiment.
pub const PAPER_PRESET: &str = "paper-50km";

/// Dark-count rate of each detector in the preset (Hz).
pub const PRESET_DARK_COUNT_RATE_HZ: f64 = 1.0e3;

/// Detection window per time bin in the preset (s).
pub const PRESET_DETECTION_WINDOW_S: f64 = 2.0e-9;

/// Pulse pairs sent in 59.5 hours at 1 MHz, the length of the reference run.
pub const REFERENCE_RUN_PULSE_PAIRS: u64 = 214_200_000_000;

/// Misalignment for the preset, found with `expected::calibrate_misalignment`
/// against a phase-error bound of 0.246 on expected data of
/// [`REFERENCE_RUN_PULSE_PAIRS`] pulse pairs.
pub const PRESET_MISALIGNMENT: f64 = 0.2015;

const DEFAULT_SIGMAS: f64 = 3.0;
const DEFAULT_CUTOFF: usize = 7;
const MAX_CUTOFF: usize = 16;
const PROB_SUM_TOL: f64 = 1e-9;

fn default_sigmas() -> f64 {
    DEFAULT_SIGMAS
}

fn default_cutoff() -> usize {
    DEFAULT_CUTOFF
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Alice's mean photon numbers per pulse, at channel input.
    pub intensities_alice: [f64; NUM_INTENSITIES],
    /// Bob's mean photon numbers per pulse, at channel input.
    pub intensities_bob: [f64; NUM_INTENSITIES],
    pub intensity_probs_alice: [f64; NUM_INTENSITIES],
    pub intensity_probs_bob: [f64; NUM_INTENSITIES],
    /// Probability that a party picks the Z basis.
    pub basis_prob_z: f64,
    pub fiber_length_km_alice: f64,
    pub fiber_length_km_bob: f64,
    pub attenuation_db_per_km: f64,
    /// Total detection efficiency of each detector.
    pub detector_efficiency: f64,
    /// Dark-count probability per detector per time-bin gate.
    pub dark_count_prob_per_gate: f64,
    /// Probability that a round's two arms do not interfere.
    pub misalignment: f64,
    /// Number of simulated rounds.
    #[serde(with = "u64_repr")]
    pub pulse_pairs: u64,
    /// Clock rate, only used to convert per-pulse rates into per-second rates.
    pub repetition_rate_hz: f64,
    /// Error-correction inefficiency `f`.
    pub ec_efficiency: f64,
    /// Standard deviations used to widen the decoy constraints.
    #[serde(default = "default_sigmas")]
    pub fluctuation_sigmas: f64,
    /// Photon-number truncation order of the decoy linear programs.
    #[serde(default = "default_cutoff")]
    pub photon_cutoff: usize,
    #[serde(with = "u64_repr")]
    pub seed: u64,
}

/// One violated configuration invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("cannot serialize configuration: {0}")]
    Serialize(String),
    #[error("cannot read configuration {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

impl ConfigError {
    /// Violations carried by an [`ConfigError::Invalid`] error.
    pub fn violations(&self) -> &[Violation] {
        match self {
            ConfigError::Invalid(v) => v,
            _ => &[],
        }
    }
}

impl ExperimentConfig {
    /// The 2 x 25 km four-intensity experiment.
    ///
    /// Basis and intensity choice are uniform; the source does not publish them.
    pub fn paper_50km() -> Self {
        ExperimentConfig {
            intensities_alice: [0.0, 0.1, 0.2, 0.5],
            intensities_bob: [0.0, 0.1, 0.2, 0.5],
            intensity_probs_alice: [0.25; NUM_INTENSITIES],
            intensity_probs_bob: [0.25; NUM_INTENSITIES],
            basis_prob_z: 0.5,
            fiber_length_km_alice: 25.0,
            fiber_length_km_bob: 25.0,
            attenuation_db_per_km: 0.2,
            detector_efficiency: 0.20,
            dark_count_prob_per_gate: PRESET_DARK_COUNT_RATE_HZ * PRESET_DETECTION_WINDOW_S,
            misalignment: PRESET_MISALIGNMENT,
            pulse_pairs: 1_000_000_000,
            repetition_rate_hz: 1.0e6,
            ec_efficiency: 1.16,
            fluctuation_sigmas: DEFAULT_SIGMAS,
            photon_cutoff: DEFAULT_CUTOFF,
            seed: 0x6d64_692d_716b_6421,
        }
    }

    /// Looks up a built-in preset by name.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            PAPER_PRESET => Some(Self::paper_50km()),
            _ => None,
        }
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        let mut push = |field: &'static str, message: String| v.push(Violation { field, message });

        for (field, list) in [
            ("intensities_alice", &self.intensities_alice),
            ("intensities_bob", &self.intensities_bob),
        ] {
            if let Some(x) = list.iter().find(|x| !x.is_finite() || **x < 0.0) {
                push(field, format!("intensity {x} must be finite and >= 0"));
            }
        }
        for (field, probs) in [
            ("intensity_probs_alice", &self.intensity_probs_alice),
            ("intensity_probs_bob", &self.intensity_probs_bob),
        ] {
            if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0) {
                push(field, format!("probability {p} outside [0, 1]"));
            }
            let sum: f64 = probs.iter().sum();
            if !((sum - 1.0).abs() <= PROB_SUM_TOL) {
                push(field, format!("normalization violated: probabilities sum to {sum}, expected 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.basis_prob_z) {
            push("basis_prob_z", format!("{} outside [0, 1]", self.basis_prob_z));
        }
        for (field, x) in [
            ("fiber_length_km_alice", self.fiber_length_km_alice),
            ("fiber_length_km_bob", self.fiber_length_km_bob),
            ("attenuation_db_per_km", self.attenuation_db_per_km),
            ("fluctuation_sigmas", self.fluctuation_sigmas),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                push(field, format!("{x} must be finite and >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.detector_efficiency) {
            push("detector_efficiency", format!("{} outside [0, 1]", self.detector_efficiency));
        }
        if !(0.0..1.0).contains(&self.dark_count_prob_per_gate) {
            push(
                "dark_count_prob_per_gate",
                format!("{} outside [0, 1)", self.dark_count_prob_per_gate),
            );
        }
        if !(0.0..=0.5).contains(&self.misalignment) {
            push("misalignment", format!("{} outside [0, 0.5]", self.misalignment));
        }
        if self.pulse_pairs < 1 {
            push("pulse_pairs", "must be >= 1: no data to simulate".to_string());
        }
        if !(self.repetition_rate_hz.is_finite() && self.repetition_rate_hz > 0.0) {
            push("repetition_rate_hz", format!("{} must be > 0", self.repetition_rate_hz));
        }
        if !(self.ec_efficiency.is_finite() && self.ec_efficiency >= 1.0) {
            push("ec_efficiency", format!("{} must be >= 1", self.ec_efficiency));
        }
        if !(2..=MAX_CUTOFF).contains(&self.photon_cutoff) {
            push(
                "photon_cutoff",
                format!("{} outside [2, {MAX_CUTOFF}]", self.photon_cutoff),
            );
        }

        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    /// Parses TOML (`key = value`) or, when the text starts with `{`, JSON.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Serialize(e.to_string()))
    }

    pub fn to_json_string(&self) -> Result<String, ConfigError> {
        serde_json::to_string_pretty(self).map_err(|e| ConfigError::Serialize(e.to_string()))
    }

    /// Fraction of rounds in which Alice picks intensity `k` and Bob picks `l`,
    /// both in `basis`.
    pub fn setting_probability(&self, k: usize, l: usize, basis: crate::Basis) -> f64 {
        let pb = match basis {
            crate::Basis::Z => self.basis_prob_z,
            crate::Basis::X => 1.0 - self.basis_prob_z,
        };
        self.intensity_probs_alice[k] * self.intensity_probs_bob[l] * pb * pb
    }
}

/// Integers above `i64::MAX` do not fit a TOML integer; those are written as
/// decimal strings. Both forms are accepted on input.
mod u64_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        if *v <= i64::MAX as u64 {
            s.serialize_u64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(v),
            Repr::Str(s) => s.trim().parse().map_err(serde::de::Error::custom),
        }
    }
}
