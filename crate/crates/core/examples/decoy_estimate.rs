//! Decoy-state bounds on the single-photon-pair yield and phase error.
//!
//! With a tally CSV and config (file or preset name) as arguments the bounds
//! come from that data; without arguments they come from noise-free
//! expected data for the preset at several run lengths, which shows how the
//! statistical windows dominate the e11 bound.
//!
//! cargo run --release --example decoy_estimate -- [tallies.csv config]

use std::path::Path;

use mdiqkd::config::REFERENCE_RUN_PULSE_PAIRS;
use mdiqkd::expected::expected_estimate;
use mdiqkd::pipeline::{estimate_only, ConfigSource};
use mdiqkd::{DecoyEstimate, ExperimentConfig};

fn show(e: &DecoyEstimate) {
    for lp in [&e.z_yield, &e.x_yield, &e.x_error] {
        println!("  {:<26} {:?} value {:.6e} after {} pivots", lp.program, lp.status, lp.value, lp.iterations);
    }
    println!("  Y11 lower {:.4e}   e11 upper {:.4}", e.y11_lower, e.e11_upper);
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let [tallies, config] = args.as_slice() {
        let (e, _) = estimate_only(Path::new(tallies), &ConfigSource::resolve(config)?)?;
        show(&e);
        return Ok(());
    }

    let mut cfg = ExperimentConfig::paper_50km();
    for n in [1_000_000_000, 10_000_000_000, 100_000_000_000, REFERENCE_RUN_PULSE_PAIRS, 10_000_000_000_000] {
        cfg.pulse_pairs = n;
        println!("expected data, {n:e} pulse pairs");
        show(&expected_estimate(&cfg)?);
    }
    cfg.fluctuation_sigmas = 0.0;
    println!("expected data, no statistical window");
    show(&expected_estimate(&cfg)?);
    Ok(())
}
