//! Phase-randomized weak-coherent time-bin sources and lossy fiber arms.
//!
//! A pulse pair is a two-mode coherent state, one mode per time bin. Only the
//! product of source intensity and arm transmittance reaches the beam
//! splitter, so attenuation is folded into the arriving amplitudes.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64;
use rand::Rng;

use crate::Basis;

/// Power transmittance of a fiber of `length_km` with loss `attenuation_db_per_km`.
pub fn arm_transmittance(length_km: f64, attenuation_db_per_km: f64) -> f64 {
    10f64.powf(-attenuation_db_per_km * length_km / 10.0)
}

/// Coherent state arriving at the measurement station from one party.
///
/// The bin amplitudes exclude the global phase; see [`ArmState::phased`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmState {
    pub amp_bin0: Complex64,
    pub amp_bin1: Complex64,
    /// Uniform in [0, 2pi), fresh for every party and round.
    pub global_phase: f64,
}

impl ArmState {
    pub fn vacuum() -> Self {
        ArmState {
            amp_bin0: Complex64::new(0.0, 0.0),
            amp_bin1: Complex64::new(0.0, 0.0),
            global_phase: 0.0,
        }
    }

    /// State with a given global phase. Z puts the full amplitude in bin
    /// `bit`; X splits it evenly with bin 1 shifted by `pi * bit`.
    pub fn prepare(intensity: f64, basis: Basis, bit: bool, transmittance: f64, global_phase: f64) -> Self {
        let amp = (transmittance * intensity).sqrt();
        let zero = Complex64::new(0.0, 0.0);
        let (amp_bin0, amp_bin1) = match (basis, bit) {
            (Basis::Z, false) => (Complex64::new(amp, 0.0), zero),
            (Basis::Z, true) => (zero, Complex64::new(amp, 0.0)),
            (Basis::X, bit) => {
                let half = amp * FRAC_1_SQRT_2;
                let phase = if bit { PI } else { 0.0 };
                (Complex64::new(half, 0.0), Complex64::from_polar(half, phase))
            }
        };
        ArmState {
            amp_bin0,
            amp_bin1,
            global_phase,
        }
    }

    /// Mean photon number summed over both bins.
    pub fn mean_photons(&self) -> f64 {
        self.amp_bin0.norm_sqr() + self.amp_bin1.norm_sqr()
    }

    /// Bin amplitudes including the global phase.
    pub fn phased(&self) -> [Complex64; 2] {
        let rot = Complex64::from_polar(1.0, self.global_phase);
        [self.amp_bin0 * rot, self.amp_bin1 * rot]
    }
}

/// Prepares one party's pulse and propagates it through its arm. Draws the
/// global phase from `rng`.
pub fn encode_pulse<R: Rng + ?Sized>(
    intensity: f64,
    basis: Basis,
    bit: bool,
    transmittance: f64,
    rng: &mut R,
) -> ArmState {
    let phase = rng.random::<f64>() * TAU;
    ArmState::prepare(intensity, basis, bit, transmittance, phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::round_rng;

    #[test]
    fn transmittance_values() {
        assert_eq!(arm_transmittance(0.0, 0.2), 1.0);
        assert!((arm_transmittance(25.0, 0.2) - 0.316_227_766_016_837_94).abs() < 1e-15);
        assert!((arm_transmittance(50.0, 0.2) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn z_encoding() {
        let s = ArmState::prepare(0.5, Basis::Z, false, 1.0, 0.0);
        assert!((s.amp_bin0.re - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.amp_bin1.norm(), 0.0);
        let s = ArmState::prepare(0.5, Basis::Z, true, 1.0, 0.0);
        assert_eq!(s.amp_bin0.norm(), 0.0);
    }

    #[test]
    fn vacuum_decoy_has_no_amplitude() {
        let mut rng = round_rng(1, 1);
        for basis in Basis::ALL {
            for bit in [false, true] {
                let s = encode_pulse(0.0, basis, bit, arm_transmittance(25.0, 0.2), &mut rng);
                assert_eq!(s.amp_bin0.norm(), 0.0);
                assert_eq!(s.amp_bin1.norm(), 0.0);
            }
        }
    }

    #[test]
    fn x_encoding_splits_energy_with_pi_phase() {
        let s = ArmState::prepare(0.2, Basis::X, true, 0.1, 0.0);
        assert!((s.amp_bin0.norm_sqr() - 0.01).abs() < 1e-15);
        assert!((s.amp_bin1.norm_sqr() - 0.01).abs() < 1e-15);
        let rel = (s.amp_bin1 / s.amp_bin0).arg();
        assert!((rel.abs() - PI).abs() < 1e-12);
        let s = ArmState::prepare(0.2, Basis::X, false, 0.1, 0.0);
        assert!((s.amp_bin1 / s.amp_bin0).arg().abs() < 1e-12);
    }

    #[test]
    fn global_phase_preserves_energy() {
        let s = ArmState::prepare(0.5, Basis::X, true, 0.3, 1.234);
        let e: f64 = s.phased().iter().map(|a| a.norm_sqr()).sum();
        assert!((e - 0.15).abs() < 1e-12);
    }
}
