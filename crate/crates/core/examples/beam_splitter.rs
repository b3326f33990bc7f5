//! Two weak coherent pulses meeting at the relay's beam splitter.
//!
//! Prints the accepted-coincidence probability for every bit pair in both
//! bases as the relative phase between the lasers sweeps through a period.
//! Z-basis coincidences only ever come from opposite bits; X-basis ones
//! depend on the phase, which is why the X errors are large.

use std::f64::consts::TAU;

use mdiqkd::bsm::{bsm_success_probability, click_probabilities, interfere, DetectorModel};
use mdiqkd::source::ArmState;
use mdiqkd::Basis;

fn main() {
    let model = DetectorModel { efficiency: 0.2, dark_count_prob: 2e-6, misalignment: 0.0 };
    let mu = 0.5;

    for basis in Basis::ALL {
        println!("{basis} basis, mu = nu = {mu} at the relay");
        println!("{:>8} {:>12} {:>12} {:>12} {:>12}", "phase", "(0,0)", "(0,1)", "(1,0)", "(1,1)");
        for step in 0..=8 {
            let phase = TAU * step as f64 / 8.0;
            let p: Vec<f64> = [(false, false), (false, true), (true, false), (true, true)]
                .iter()
                .map(|&(ba, bb)| {
                    let a = ArmState::prepare(mu, basis, ba, 1.0, phase);
                    let b = ArmState::prepare(mu, basis, bb, 1.0, 0.0);
                    bsm_success_probability(click_probabilities(interfere(&a, &b).mean_photons(), &model))
                })
                .collect();
            println!("{phase:>8.3} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}", p[0], p[1], p[2], p[3]);
        }
        println!();
    }
}
