//! Expected (infinite-run) gains and error rates of the simulator.
//!
//! Given the two global phases every gate clicks independently, so the
//! acceptance and error probabilities of a setting are integrals over the
//! relative phase of closed-form expressions. The integrand is smooth and
//! periodic, so the trapezoid rule converges geometrically.

use std::f64::consts::TAU;

use crate::bsm::{bsm_success_probability, click_probabilities, interfere, DetectorModel};
use crate::config::{ExperimentConfig, NUM_INTENSITIES};
use crate::decoy::{estimate_from_rates, DecoyError, DecoyEstimate};
use crate::model::Basis;
use crate::source::{arm_transmittance, ArmState};
use crate::tally::{CellRate, CellStats, RatesTable};

/// Phase nodes used by [`expected_cell`].
pub const PHASE_NODES: usize = 256;

/// Probability that a matched-basis round of this setting is accepted, and
/// that it is accepted with an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedCell {
    pub gain: f64,
    pub error_gain: f64,
}

impl ExpectedCell {
    pub fn qber(&self) -> f64 {
        if self.gain > 0.0 {
            self.error_gain / self.gain
        } else {
            0.0
        }
    }
}

/// Averages over bits, the relative phase and the misalignment event.
/// `mu` and `nu` are the intensities arriving at the beam splitter.
pub fn expected_cell(mu: f64, nu: f64, basis: Basis, model: &DetectorModel, nodes: usize) -> ExpectedCell {
    let mut gain = 0.0;
    let mut error_gain = 0.0;
    for bit_a in [false, true] {
        for bit_b in [false, true] {
            let bob = ArmState::prepare(nu, basis, bit_b, 1.0, 0.0);
            let mut acc = 0.0;
            for j in 0..nodes {
                let theta = TAU * j as f64 / nodes as f64;
                let alice = ArmState::prepare(mu, basis, bit_a, 1.0, theta);
                let out = interfere(&alice, &bob);
                let coherent = bsm_success_probability(click_probabilities(out.mean_photons(), model));
                let incoherent =
                    bsm_success_probability(click_probabilities(out.incoherent_mean_photons(), model));
                acc += (1.0 - model.misalignment) * coherent + model.misalignment * incoherent;
            }
            let p = 0.25 * acc / nodes as f64;
            gain += p;
            // Bob flips his bit, so equal raw bits are errors.
            if bit_a == bit_b {
                error_gain += p;
            }
        }
    }
    ExpectedCell { gain, error_gain }
}

/// Expected rates of every matched-basis cell, with `sent` set to the
/// expected number of rounds of that setting in a run of `cfg.pulse_pairs`.
pub fn expected_rates(cfg: &ExperimentConfig) -> RatesTable {
    let model = DetectorModel::from_config(cfg);
    let ta = arm_transmittance(cfg.fiber_length_km_alice, cfg.attenuation_db_per_km);
    let tb = arm_transmittance(cfg.fiber_length_km_bob, cfg.attenuation_db_per_km);
    let mut rates = RatesTable::empty();
    for k in 0..NUM_INTENSITIES {
        for l in 0..NUM_INTENSITIES {
            for basis in Basis::ALL {
                let sent = (cfg.pulse_pairs as f64 * cfg.setting_probability(k, l, basis)).round() as u64;
                if sent == 0 {
                    continue;
                }
                let c = expected_cell(
                    cfg.intensities_alice[k] * ta,
                    cfg.intensities_bob[l] * tb,
                    basis,
                    &model,
                    PHASE_NODES,
                );
                rates.set(k, l, basis, CellRate::Measured(CellStats::from_rates(sent, c.gain, c.qber())));
            }
        }
    }
    rates
}

/// Decoy bounds on expected data.
pub fn expected_estimate(cfg: &ExperimentConfig) -> Result<DecoyEstimate, DecoyError> {
    estimate_from_rates(&expected_rates(cfg), cfg)
}

/// Finds the misalignment at which the expected-data `e11` bound equals
/// `target`, by bisection on `[0, 0.5]`. Returns `None` if the target is
/// outside the range covered.
pub fn calibrate_misalignment(cfg: &ExperimentConfig, target: f64, tol: f64) -> Option<f64> {
    let e11_at = |ed: f64| -> Option<f64> {
        let mut c = cfg.clone();
        c.misalignment = ed;
        expected_estimate(&c).ok().map(|e| e.e11_upper)
    };
    let (mut lo, mut hi) = (0.0, 0.5);
    let (f_lo, f_hi) = (e11_at(lo)?, e11_at(hi)?);
    if !(f_lo <= target && target <= f_hi) {
        return None;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if e11_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
