#![allow(dead_code)]

use mdiqkd::decoy::{estimate, DecoyObservations, DecoyOptions, GainObservation};
use mdiqkd::tally::CellStats;
use mdiqkd::Basis;
use num_complex::Complex64;
use rand::Rng;

/// Photon-number cutoff per input mode.
pub const FOCK_CUTOFF: usize = 4;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Joint photon-number distribution at the two beam-splitter outputs for
/// coherent inputs `a` and `b` in one time bin, by expanding the truncated
/// Fock states through `a^+ -> (c^+ + d^+)/sqrt2`, `b^+ -> (c^+ - d^+)/sqrt2`.
/// Entry `[p][q]` is the probability of `p` photons towards D1 and `q`
/// towards D2.
pub fn fock_output_distribution(a: Complex64, b: Complex64) -> Vec<Vec<f64>> {
    let max = 2 * FOCK_CUTOFF;
    let mut amp = vec![vec![Complex64::new(0.0, 0.0); max + 1]; max + 1];
    let norm = (-(a.norm_sqr() + b.norm_sqr()) / 2.0).exp();
    for n in 0..=FOCK_CUTOFF {
        for m in 0..=FOCK_CUTOFF {
            // amplitude of |n, m> in the input
            let input = a.powu(n as u32) * b.powu(m as u32) * norm / (factorial(n) * factorial(m)).sqrt();
            let scale = 2f64.powf(-((n + m) as f64) / 2.0) / (factorial(n) * factorial(m)).sqrt();
            for i in 0..=n {
                for j in 0..=m {
                    let sign = if (m - j) % 2 == 0 { 1.0 } else { -1.0 };
                    let coeff = binomial(n, i) * binomial(m, j) * sign * scale;
                    let p = i + j;
                    let q = n + m - p;
                    amp[p][q] += input * coeff * (factorial(p) * factorial(q)).sqrt();
                }
            }
        }
    }
    amp.iter().map(|row| row.iter().map(|z| z.norm_sqr()).collect()).collect()
}

fn click_given_photons(n: usize, efficiency: f64, dark: f64) -> f64 {
    1.0 - (1.0 - dark) * (1.0 - efficiency).powi(n as i32)
}

/// Probabilities of the 16 click patterns, bit `i` of the index set when
/// gate `i` of (D1 t0, D1 t1, D2 t0, D2 t1) clicked. `alice` and `bob` are
/// the phased bin amplitudes arriving at the beam splitter.
pub fn fock_pattern_probabilities(alice: [Complex64; 2], bob: [Complex64; 2], efficiency: f64, dark: f64) -> [f64; 16] {
    let bins = [
        fock_output_distribution(alice[0], bob[0]),
        fock_output_distribution(alice[1], bob[1]),
    ];
    let mut out = [0.0; 16];
    for (pattern, slot) in out.iter_mut().enumerate() {
        let flag = |i: usize| pattern >> i & 1 == 1;
        let mut prob = 1.0;
        for (t, dist) in bins.iter().enumerate() {
            let (f1, f2) = (flag(t), flag(2 + t));
            let mut s = 0.0;
            for (p, row) in dist.iter().enumerate() {
                for (q, w) in row.iter().enumerate() {
                    let c1 = click_given_photons(p, efficiency, dark);
                    let c2 = click_given_photons(q, efficiency, dark);
                    s += w * if f1 { c1 } else { 1.0 - c1 } * if f2 { c2 } else { 1.0 - c2 };
                }
            }
            prob *= s;
        }
        *slot = prob;
    }
    out
}

/// Mean and binomial standard deviation of a count over `n` trials.
pub fn binomial_sigma(p: f64, n: f64) -> f64 {
    (n * p * (1.0 - p)).sqrt()
}

// ---------------------------------------------------------------------------
// Planted photon-number models

pub const PLANT: usize = 24;

#[derive(Debug)]
pub struct Planted {
    pub yields: Vec<Vec<f64>>,
    pub errors: Vec<Vec<f64>>,
}

impl Planted {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let scale = 10f64.powf(rng.random_range(-4.0..0.0));
        let yields = (0..PLANT)
            .map(|_| (0..PLANT).map(|_| (scale * rng.random::<f64>()).min(1.0)).collect())
            .collect();
        let errors = (0..PLANT)
            .map(|_| (0..PLANT).map(|_| rng.random_range(0.0..0.5)).collect())
            .collect();
        Planted { yields, errors }
    }

    /// Exact gain and error gain for the given intensities.
    pub fn observe(&self, mu: f64, nu: f64) -> (f64, f64) {
        let (mut q, mut eq) = (0.0, 0.0);
        let (mut pi, mut fi) = (1.0, 1.0);
        for i in 0..PLANT {
            let (mut pj, mut fj) = (1.0, 1.0);
            for j in 0..PLANT {
                let c = pi / fi * pj / fj;
                q += c * self.yields[i][j];
                eq += c * self.yields[i][j] * self.errors[i][j];
                pj *= nu;
                fj *= (j + 1) as f64;
            }
            pi *= mu;
            fi *= (i + 1) as f64;
        }
        let w = (-mu - nu).exp();
        (q * w, eq * w)
    }

    pub fn observations(&self, basis: Basis, ia: &[f64; 4], ib: &[f64; 4], sent: u64) -> DecoyObservations {
        let cells = std::array::from_fn(|k| {
            std::array::from_fn(|l| {
                let (q, eq) = self.observe(ia[k], ib[l]);
                let s = CellStats::from_rates(sent, q, if q > 0.0 { eq / q } else { 0.0 });
                Some(GainObservation {
                    gain: q,
                    gain_sigma: s.sigma_q,
                    error_gain: eq,
                    error_gain_sigma: s.sigma_error_gain(),
                })
            })
        });
        DecoyObservations { basis, cells }
    }
}

pub fn random_intensities<R: Rng>(rng: &mut R) -> [f64; 4] {
    let mut v = [0.0, rng.random_range(0.01..0.3), rng.random_range(0.01..0.5), rng.random_range(0.1..1.0)];
    v[1..].sort_by(f64::total_cmp);
    v
}

/// One randomized soundness trial: two planted bases, random intensities,
/// run length and cutoff, 3 sigma windows.
#[derive(Debug)]
pub struct PlantedTrial {
    pub z: Planted,
    pub x: Planted,
    pub ia: [f64; 4],
    pub ib: [f64; 4],
    pub sent: u64,
    pub opts: DecoyOptions,
}

pub fn planted_trial<R: Rng>(rng: &mut R) -> PlantedTrial {
    let ia = random_intensities(rng);
    let ib = random_intensities(rng);
    let z = Planted::random(rng);
    let x = Planted::random(rng);
    let sent = 10u64.pow(rng.random_range(6..11));
    let opts = DecoyOptions { photon_cutoff: rng.random_range(3..=9), n_sigmas: 3.0 };
    PlantedTrial { z, x, ia, ib, sent, opts }
}

impl PlantedTrial {
    /// Whether the Y11 lower bound and the e11 upper bound hold.
    pub fn check(&self) -> Result<(bool, bool), String> {
        let est = estimate(
            &self.z.observations(Basis::Z, &self.ia, &self.ib, self.sent),
            &self.x.observations(Basis::X, &self.ia, &self.ib, self.sent),
            &self.ia,
            &self.ib,
            &self.opts,
        )
        .map_err(|e| e.to_string())?;
        Ok((
            est.y11_lower <= self.z.yields[1][1] * (1.0 + 1e-9),
            est.e11_upper >= self.x.errors[1][1] * (1.0 - 1e-9),
        ))
    }
}
