//! Partial Bell-state measurement: a balanced beam splitter followed by two
//! threshold detectors, each gated in both time bins.
//!
//! Output modes of a coherent input are again coherent, so given the two
//! global phases every detector/bin clicks independently with probability
//! `1 - (1 - p_d) exp(-eta m)`, where `m` is the mean photon number of that
//! mode. Misalignment is modelled as a per-round event: with probability
//! `e_d` the arms are mutually distinguishable and each detector receives
//! half the light of its bin, with no interference term.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;

use crate::config::{ConfigError, ExperimentConfig};
use crate::model::{Basis, Clicks, PulsePairOutcome};
use crate::seed::round_rng;
use crate::source::{arm_transmittance, encode_pulse, ArmState};

/// Detector parameters shared by both detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub dark_count_prob: f64,
    pub misalignment: f64,
}

impl DetectorModel {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        DetectorModel {
            efficiency: cfg.detector_efficiency,
            dark_count_prob: cfg.dark_count_prob_per_gate,
            misalignment: cfg.misalignment,
        }
    }
}

/// Coherent amplitudes at the two beam-splitter outputs, per time bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsmOutputs {
    pub d1: [Complex64; 2],
    pub d2: [Complex64; 2],
}

impl BsmOutputs {
    /// Mean photon numbers ordered (D1,t0), (D1,t1), (D2,t0), (D2,t1).
    pub fn mean_photons(&self) -> [f64; 4] {
        [
            self.d1[0].norm_sqr(),
            self.d1[1].norm_sqr(),
            self.d2[0].norm_sqr(),
            self.d2[1].norm_sqr(),
        ]
    }

    /// Mean photon numbers when the arms do not interfere: each detector sees
    /// half of the light present in its bin.
    pub fn incoherent_mean_photons(&self) -> [f64; 4] {
        let m = self.mean_photons();
        let bin0 = 0.5 * (m[0] + m[2]);
        let bin1 = 0.5 * (m[1] + m[3]);
        [bin0, bin1, bin0, bin1]
    }
}

/// Balanced beam splitter: D1 gets `(a + b)/sqrt 2`, D2 gets `(a - b)/sqrt 2`
/// in each bin, with the global phases applied.
pub fn interfere(alice: &ArmState, bob: &ArmState) -> BsmOutputs {
    let a = alice.phased();
    let b = bob.phased();
    let s = FRAC_1_SQRT_2;
    BsmOutputs {
        d1: [(a[0] + b[0]) * s, (a[1] + b[1]) * s],
        d2: [(a[0] - b[0]) * s, (a[1] - b[1]) * s],
    }
}

/// Click probability of a threshold detector gate receiving a coherent mode
/// with `mean_photons`.
#[inline]
pub fn click_probability(mean_photons: f64, efficiency: f64, dark_count_prob: f64) -> f64 {
    1.0 - (1.0 - dark_count_prob) * (-efficiency * mean_photons).exp()
}

/// Per-gate click probabilities for the four (detector, bin) gates.
pub fn click_probabilities(means: [f64; 4], model: &DetectorModel) -> [f64; 4] {
    means.map(|m| click_probability(m, model.efficiency, model.dark_count_prob))
}

/// Probability of every click pattern, indexed as [`Clicks::pattern_index`],
/// for independent gates.
pub fn pattern_probabilities(click_probs: [f64; 4]) -> [f64; 16] {
    std::array::from_fn(|pattern| {
        (0..4)
            .map(|i| {
                if pattern >> i & 1 == 1 {
                    click_probs[i]
                } else {
                    1.0 - click_probs[i]
                }
            })
            .product()
    })
}

/// Probability that the gates produce an accepted coincidence.
pub fn bsm_success_probability(click_probs: [f64; 4]) -> f64 {
    let [p_a, p_b, p_c, p_d] = click_probs;
    p_a * p_d * (1.0 - p_b) * (1.0 - p_c) + p_b * p_c * (1.0 - p_a) * (1.0 - p_d)
}

/// Samples the four gates. Draws the misalignment event first, then one
/// uniform per gate in flag order.
pub fn detect<R: Rng + ?Sized>(outputs: &BsmOutputs, model: &DetectorModel, rng: &mut R) -> Clicks {
    let misaligned = rng.random::<f64>() < model.misalignment;
    let means = if misaligned {
        outputs.incoherent_mean_photons()
    } else {
        outputs.mean_photons()
    };
    let probs = click_probabilities(means, model);
    Clicks::from_flags(probs.map(|p| rng.random::<f64>() < p))
}

/// Round simulator with everything derivable from the config precomputed.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: ExperimentConfig,
    model: DetectorModel,
    transmittance_alice: f64,
    transmittance_bob: f64,
    cumulative_alice: [f64; 4],
    cumulative_bob: [f64; 4],
}

/// Cumulative distribution normalized so the last entry is exactly 1.
fn cumulative(p: &[f64; 4]) -> [f64; 4] {
    let total: f64 = p.iter().sum();
    let mut acc = 0.0;
    let mut c = p.map(|x| {
        acc += x;
        acc / total
    });
    c[3] = 1.0;
    c
}

#[inline]
fn pick(cumulative: &[f64; 4], u: f64) -> usize {
    cumulative.iter().position(|&c| u < c).unwrap_or(3)
}

impl Simulator {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(Simulator {
            model: DetectorModel::from_config(cfg),
            transmittance_alice: arm_transmittance(cfg.fiber_length_km_alice, cfg.attenuation_db_per_km),
            transmittance_bob: arm_transmittance(cfg.fiber_length_km_bob, cfg.attenuation_db_per_km),
            cumulative_alice: cumulative(&cfg.intensity_probs_alice),
            cumulative_bob: cumulative(&cfg.intensity_probs_bob),
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn detector(&self) -> &DetectorModel {
        &self.model
    }

    pub fn transmittances(&self) -> (f64, f64) {
        (self.transmittance_alice, self.transmittance_bob)
    }

    /// Simulates round `round_index`; the result depends only on the config
    /// and the index.
    pub fn simulate_round(&self, round_index: u64) -> PulsePairOutcome {
        let mut rng = round_rng(self.cfg.seed, round_index);
        let k = pick(&self.cumulative_alice, rng.random());
        let l = pick(&self.cumulative_bob, rng.random());
        let pick_basis = |u: f64| if u < self.cfg.basis_prob_z { Basis::Z } else { Basis::X };
        let basis_alice = pick_basis(rng.random());
        let basis_bob = pick_basis(rng.random());
        let bit_alice: bool = rng.random();
        let bit_bob: bool = rng.random();

        let alice = encode_pulse(
            self.cfg.intensities_alice[k],
            basis_alice,
            bit_alice,
            self.transmittance_alice,
            &mut rng,
        );
        let bob = encode_pulse(
            self.cfg.intensities_bob[l],
            basis_bob,
            bit_bob,
            self.transmittance_bob,
            &mut rng,
        );
        let outputs = interfere(&alice, &bob);
        debug_assert!({
            let out: f64 = outputs.mean_photons().iter().sum();
            (out - alice.mean_photons() - bob.mean_photons()).abs() <= 1e-12
        });
        let clicks = detect(&outputs, &self.model, &mut rng);

        PulsePairOutcome {
            intensity_index_alice: k,
            intensity_index_bob: l,
            basis_alice,
            basis_bob,
            bit_alice,
            bit_bob,
            clicks,
        }
    }
}

/// One-off round simulation. Prefer [`Simulator`] for many rounds.
pub fn simulate_round(cfg: &ExperimentConfig, round_index: u64) -> Result<PulsePairOutcome, ConfigError> {
    Ok(Simulator::new(cfg)?.simulate_round(round_index))
}
