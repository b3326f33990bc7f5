//! Per-intensity-pair key-rate table for the preset on expected data at the
//! reference run length, and how the total moves with the error-correction
//! efficiency.

use mdiqkd::config::REFERENCE_RUN_PULSE_PAIRS;
use mdiqkd::expected::{expected_estimate, expected_rates};
use mdiqkd::keyrate::{key_rate, KeyRateSettings};
use mdiqkd::ExperimentConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::paper_50km();
    cfg.pulse_pairs = REFERENCE_RUN_PULSE_PAIRS;
    let rates = expected_rates(&cfg);
    let estimate = expected_estimate(&cfg)?;
    let report = key_rate(&rates, &estimate, &KeyRateSettings::from(&cfg));
    println!("{report}");

    println!();
    println!("{:>6} {:>14} {:>12}", "f", "bits/pulse", "total bits");
    for f in [1.0, 1.1, 1.16, 1.22, 1.5] {
        let mut s = KeyRateSettings::from(&cfg);
        s.ec_efficiency = f;
        let r = key_rate(&rates, &estimate, &s);
        println!("{f:>6.2} {:>14.4e} {:>12.0}", r.total_per_pulse, r.total_bits);
    }
    Ok(())
}
