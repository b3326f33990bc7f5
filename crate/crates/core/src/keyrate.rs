//! Secure key rate from the Z-basis data and the decoy bounds.
//!
//! Every (k, l) setting contributes
//!
//! ```text
//! R_kl = max{ Q11_kl [1 - H(e11)] - Q_kl f H(E_kl), 0 }
//! Q11_kl = mu_k nu_l e^(-mu_k - nu_l) Y11
//! ```
//!
//! per Z-basis round of that setting. Contributions are weighted by the
//! fraction of all pulse pairs sent in that setting and summed, so the total
//! is in bits per pulse pair.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, NUM_INTENSITIES};
use crate::decoy::DecoyEstimate;
use crate::model::Basis;
use crate::tally::RatesTable;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("binary entropy argument {0} outside [0, 1]")]
pub struct EntropyDomainError(pub f64);

/// Binary Shannon entropy in bits, with `H(0) = H(1) = 0`.
pub fn binary_entropy(e: f64) -> Result<f64, EntropyDomainError> {
    if !(0.0..=1.0).contains(&e) {
        return Err(EntropyDomainError(e));
    }
    if e == 0.0 || e == 1.0 {
        return Ok(0.0);
    }
    Ok(-e * e.log2() - (1.0 - e) * (1.0 - e).log2())
}

/// Gain of rounds in which both sources emitted exactly one photon.
pub fn q11_gain(mu: f64, nu: f64, y11: f64) -> f64 {
    mu * nu * (-mu - nu).exp() * y11
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateSettings {
    pub intensities_alice: [f64; NUM_INTENSITIES],
    pub intensities_bob: [f64; NUM_INTENSITIES],
    pub ec_efficiency: f64,
    pub pulse_pairs: u64,
    pub repetition_rate_hz: f64,
}

impl From<&ExperimentConfig> for KeyRateSettings {
    fn from(cfg: &ExperimentConfig) -> Self {
        KeyRateSettings {
            intensities_alice: cfg.intensities_alice,
            intensities_bob: cfg.intensities_bob,
            ec_efficiency: cfg.ec_efficiency,
            pulse_pairs: cfg.pulse_pairs,
            repetition_rate_hz: cfg.repetition_rate_hz,
        }
    }
}

/// Contribution of one (k, l) setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRate {
    pub k: usize,
    pub l: usize,
    pub mu: f64,
    pub nu: f64,
    /// Z-basis rounds sent in this setting.
    pub sent: u64,
    /// Gain `Q_kl`.
    pub gain: f64,
    /// QBER `E_kl`.
    pub qber: f64,
    /// Single-photon gain used, never above `gain`.
    pub q11: f64,
    /// Error-correction cost per round of this setting.
    pub ec_cost: f64,
    /// `R_kl` per Z-basis round of this setting, clamped at zero.
    pub rate: f64,
    /// `rate` weighted by this setting's share of all pulse pairs.
    pub contribution: f64,
    /// No Z-basis round was sent in this setting.
    pub empty: bool,
    /// `Q11` exceeded the measured gain and was capped.
    pub q11_capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub pairs: Vec<PairRate>,
    /// Bits per pulse pair.
    pub total_per_pulse: f64,
    pub bits_per_second: f64,
    /// Key bits for the whole run.
    pub total_bits: f64,
    pub e11_used: f64,
    pub y11_used: f64,
    pub ec_efficiency: f64,
    pub pulse_pairs: u64,
    pub repetition_rate_hz: f64,
}

impl KeyRateReport {
    pub fn pair(&self, k: usize, l: usize) -> &PairRate {
        &self.pairs[k * NUM_INTENSITIES + l]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are serializable")
    }
}

/// Evaluates the key rate from Z-basis rates and decoy bounds.
pub fn key_rate(rates: &RatesTable, estimate: &DecoyEstimate, settings: &KeyRateSettings) -> KeyRateReport {
    key_rate_with_bounds(rates, estimate.y11_lower, estimate.e11_upper, settings)
}

/// [`key_rate`] with explicit `Y11` and `e11` values.
pub fn key_rate_with_bounds(rates: &RatesTable, y11: f64, e11: f64, settings: &KeyRateSettings) -> KeyRateReport {
    let e11 = e11.clamp(0.0, 1.0);
    // A phase error rate of one half or more leaves nothing to amplify.
    let privacy = if e11 >= 0.5 {
        0.0
    } else {
        1.0 - binary_entropy(e11).expect("clamped to [0, 1]")
    };
    let n = settings.pulse_pairs as f64;
    let mut pairs = Vec::with_capacity(NUM_INTENSITIES * NUM_INTENSITIES);
    for (k, &mu) in settings.intensities_alice.iter().enumerate() {
        for (l, &nu) in settings.intensities_bob.iter().enumerate() {
            let mut p = PairRate {
                k,
                l,
                mu,
                nu,
                sent: 0,
                gain: 0.0,
                qber: 0.0,
                q11: 0.0,
                ec_cost: 0.0,
                rate: 0.0,
                contribution: 0.0,
                empty: true,
                q11_capped: false,
            };
            if let Some(s) = rates.get(k, l, Basis::Z).stats() {
                let single = q11_gain(mu, nu, y11);
                let q11 = single.min(s.q);
                let ec_cost = s.q * settings.ec_efficiency * binary_entropy(s.e.clamp(0.0, 1.0)).unwrap_or(1.0);
                let rate = (q11 * privacy - ec_cost).max(0.0);
                p = PairRate {
                    sent: s.sent,
                    gain: s.q,
                    qber: s.e,
                    q11,
                    ec_cost,
                    rate,
                    contribution: if n > 0.0 { rate * s.sent as f64 / n } else { 0.0 },
                    empty: false,
                    q11_capped: q11 < single,
                    ..p
                };
            }
            pairs.push(p);
        }
    }
    let total: f64 = pairs.iter().map(|p| p.contribution).sum();
    KeyRateReport {
        pairs,
        total_per_pulse: total,
        bits_per_second: total * settings.repetition_rate_hz,
        total_bits: total * n,
        e11_used: e11,
        y11_used: y11,
        ec_efficiency: settings.ec_efficiency,
        pulse_pairs: settings.pulse_pairs,
        repetition_rate_hz: settings.repetition_rate_hz,
    }
}

impl fmt::Display for KeyRateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>3} {:>3} {:>6} {:>6} {:>12} {:>11} {:>10} {:>11} {:>11} {:>11} {:>11}  flags",
            "k", "l", "mu", "nu", "sent", "Q", "E", "Q11", "I_ec", "R_kl", "weighted")?;
        for p in &self.pairs {
            let mut flags = Vec::new();
            if p.empty {
                flags.push("empty");
            }
            if p.q11_capped {
                flags.push("q11-capped");
            }
            writeln!(
                f,
                "{:>3} {:>3} {:>6.3} {:>6.3} {:>12} {:>11.4e} {:>10.4} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e}  {}",
                p.k, p.l, p.mu, p.nu, p.sent, p.gain, p.qber, p.q11, p.ec_cost, p.rate, p.contribution,
                flags.join(",")
            )?;
        }
        writeln!(f, "Y11 lower bound      {:.6e}", self.y11_used)?;
        writeln!(f, "e11 upper bound      {:.6}", self.e11_used)?;
        writeln!(f, "EC efficiency f      {}", self.ec_efficiency)?;
        writeln!(f, "pulse pairs          {}", self.pulse_pairs)?;
        writeln!(f, "key rate             {:.6e} bits/pulse", self.total_per_pulse)?;
        writeln!(f, "                     {:.6e} bits/s at {} Hz", self.bits_per_second, self.repetition_rate_hz)?;
        write!(f, "key for this run     {:.1} bits", self.total_bits)
    }
}
