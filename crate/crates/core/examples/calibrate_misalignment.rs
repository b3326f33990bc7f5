//! Scans the misalignment against the expected-data e11 bound and key rate,
//! then solves for the value giving a chosen e11 bound.
//!
//! cargo run --release --example calibrate_misalignment -- [target] [pulse_pairs]

use mdiqkd::expected::{calibrate_misalignment, expected_estimate, expected_rates};
use mdiqkd::keyrate::key_rate;
use mdiqkd::{Basis, ExperimentConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let target: f64 = args.next().map_or(0.246, |s| s.parse().expect("target"));
    let mut cfg = ExperimentConfig::paper_50km();
    if let Some(n) = args.next() {
        cfg.pulse_pairs = n.parse().expect("pulse pairs");
    }

    println!("{:>8} {:>10} {:>10} {:>12} {:>12} {:>10}", "e_d", "E_X(3,3)", "max E_Z", "Y11", "e11", "R");
    for ed in [0.0, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3] {
        cfg.misalignment = ed;
        let rates = expected_rates(&cfg);
        let ex = rates.get(3, 3, Basis::X).stats().unwrap().e;
        let ez = (1..4)
            .flat_map(|k| (1..4).map(move |l| (k, l)))
            .map(|(k, l)| rates.get(k, l, Basis::Z).stats().unwrap().e)
            .fold(0.0, f64::max);
        match expected_estimate(&cfg) {
            Ok(est) => {
                let r = key_rate(&rates, &est, &(&cfg).into());
                println!(
                    "{ed:>8.3} {ex:>10.4} {ez:>10.5} {:>12.4e} {:>12.4} {:>10.3e}",
                    est.y11_lower, est.e11_upper, r.total_per_pulse
                );
            }
            Err(e) => println!("{ed:>8.3} {ex:>10.4} {ez:>10.5} {e}"),
        }
    }

    match calibrate_misalignment(&cfg, target, 1e-5) {
        Some(ed) => println!("e11 bound {target} reached at misalignment {ed:.5}"),
        None => println!("e11 bound {target} is outside the range reachable by misalignment alone"),
    }
}
