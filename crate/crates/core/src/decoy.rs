//! Decoy-state bounds on the single-photon yield `Y11` and phase error `e11`.
//!
//! For intensities `mu_k`, `nu_l` the measured gain satisfies
//!
//! ```text
//! Q_kl e^(mu_k + nu_l)     = sum_ij mu_k^i nu_l^j / (i! j!) Y_ij
//! E_kl Q_kl e^(mu_k + nu_l) = sum_ij mu_k^i nu_l^j / (i! j!) e_ij Y_ij
//! ```
//!
//! with `Y_ij` and `e_ij` shared by all 16 settings. Each identity is
//! truncated to `i, j < n_cut`, widened by `n_sigmas` standard deviations of
//! the measured side, and solved as a linear program: once for the lower
//! bound of `Y11` and once, in the variables `b_ij = e_ij Y_ij`, for the
//! upper bound of `b11`.
//!
//! The truncated sum never exceeds the full one, and the discarded part is at
//! most `tail = sum_{i or j >= n_cut} mu^i nu^j / (i! j!)` because every
//! yield is at most one. Hence
//!
//! ```text
//! (Q - n sigma) e^(mu+nu) - tail <= sum_{i,j < n_cut} c_ij Y_ij <= (Q + n sigma) e^(mu+nu)
//! ```
//!
//! holds for every physical model, at any cutoff.

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, NUM_INTENSITIES};
use crate::lp::{solve_lp, LpError, LpProblem, LpSolution, LpStatus, Objective, Sense};
use crate::model::Basis;
use crate::tally::RatesTable;

/// Measured left-hand sides of one setting with their deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainObservation {
    /// Gain `Q`.
    pub gain: f64,
    pub gain_sigma: f64,
    /// Error gain `E * Q`.
    pub error_gain: f64,
    pub error_gain_sigma: f64,
}

/// Observations for the 16 settings of one basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoyObservations {
    pub basis: Basis,
    pub cells: [[Option<GainObservation>; NUM_INTENSITIES]; NUM_INTENSITIES],
}

/// Binomial deviation of a rate over `sent` trials, with the rate taken as
/// at least one event. A cell that saw nothing would otherwise pin its
/// constraint to exactly zero.
fn floored_sigma(rate: f64, sent: u64) -> f64 {
    let n = sent as f64;
    let p = rate.max(1.0 / n).min(0.5);
    (p * (1.0 - p) / n).sqrt().max((rate * (1.0 - rate) / n).sqrt())
}

impl DecoyObservations {
    /// Takes the `basis` cells of a rates table; empty cells stay missing.
    pub fn from_rates(rates: &RatesTable, basis: Basis) -> Self {
        let cells = std::array::from_fn(|k| {
            std::array::from_fn(|l| {
                rates.get(k, l, basis).stats().map(|s| GainObservation {
                    gain: s.q,
                    gain_sigma: floored_sigma(s.q, s.sent),
                    error_gain: s.error_gain(),
                    error_gain_sigma: floored_sigma(s.error_gain(), s.sent),
                })
            })
        });
        DecoyObservations { basis, cells }
    }

    fn get(&self, k: usize, l: usize) -> Result<&GainObservation, DecoyError> {
        self.cells[k][l].as_ref().ok_or(DecoyError::MissingCell {
            basis: self.basis,
            k,
            l,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyOptions {
    pub photon_cutoff: usize,
    pub n_sigmas: f64,
}

impl DecoyOptions {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        DecoyOptions {
            photon_cutoff: cfg.photon_cutoff,
            n_sigmas: cfg.fluctuation_sigmas,
        }
    }
}

impl Default for DecoyOptions {
    fn default() -> Self {
        DecoyOptions {
            photon_cutoff: 7,
            n_sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecoyError {
    #[error("no data for {basis}-basis cell (k={k}, l={l})")]
    MissingCell { basis: Basis, k: usize, l: usize },
    #[error("photon cutoff must be at least 2, got {0}")]
    Cutoff(usize),
    #[error(
        "{program} is infeasible: the data are inconsistent with any photon-number model at \
         {n_sigmas} standard deviations and cutoff {cutoff}; try a wider fluctuation window or a larger cutoff"
    )]
    Infeasible {
        program: &'static str,
        n_sigmas: f64,
        cutoff: usize,
    },
    #[error("{program} is unbounded")]
    Unbounded { program: &'static str },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Index of variable `(i, j)` in the decoy programs.
#[inline]
pub fn var_index(i: usize, j: usize, cutoff: usize) -> usize {
    i * cutoff + j
}

/// `x^i / i!` for `i` in `0..count`.
fn poisson_terms(x: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut term = 1.0;
    for i in 0..count {
        out.push(term);
        term *= x / (i + 1) as f64;
    }
    out
}

/// `sum_{i >= cutoff} x^i / i!`, summed directly to avoid cancellation.
fn poisson_tail(x: f64, cutoff: usize) -> f64 {
    if x == 0.0 {
        return if cutoff == 0 { 1.0 } else { 0.0 };
    }
    let mut term = poisson_terms(x, cutoff + 1)[cutoff];
    let mut sum = 0.0;
    let mut i = cutoff;
    while term > sum * 1e-18 && term > 0.0 {
        sum += term;
        i += 1;
        term *= x / i as f64;
    }
    sum
}

/// Coefficient `mu^i nu^j / (i! j!)`.
pub fn poisson_coefficient(mu: f64, nu: f64, i: usize, j: usize) -> f64 {
    poisson_terms(mu, i + 1)[i] * poisson_terms(nu, j + 1)[j]
}

/// Upper bound on the discarded terms: `sum_{i or j >= cutoff} mu^i nu^j / (i! j!)`.
pub fn truncation_tail(mu: f64, nu: f64, cutoff: usize) -> f64 {
    let head_mu: f64 = poisson_terms(mu, cutoff).iter().sum();
    poisson_tail(mu, cutoff) * nu.exp() + head_mu * poisson_tail(nu, cutoff)
}

fn coefficient_row(mu: f64, nu: f64, cutoff: usize) -> Vec<f64> {
    let a = poisson_terms(mu, cutoff);
    let b = poisson_terms(nu, cutoff);
    let mut row = vec![0.0; cutoff * cutoff];
    for i in 0..cutoff {
        for j in 0..cutoff {
            row[var_index(i, j, cutoff)] = a[i] * b[j];
        }
    }
    row
}

fn build(
    obs: &DecoyObservations,
    intensities_alice: &[f64; NUM_INTENSITIES],
    intensities_bob: &[f64; NUM_INTENSITIES],
    opts: &DecoyOptions,
    lhs: impl Fn(&GainObservation) -> (f64, f64),
) -> Result<LpProblem, DecoyError> {
    let n = opts.photon_cutoff;
    if n < 2 {
        return Err(DecoyError::Cutoff(n));
    }
    let mut p = LpProblem::new(n * n);
    for v in 0..n * n {
        p.set_bounds(v, 0.0, 1.0);
    }
    for (k, &mu) in intensities_alice.iter().enumerate() {
        for (l, &nu) in intensities_bob.iter().enumerate() {
            let (value, sigma) = lhs(obs.get(k, l)?);
            let scale = (mu + nu).exp();
            let tail = truncation_tail(mu, nu, n);
            let lower = (value - opts.n_sigmas * sigma) * scale - tail;
            let upper = (value + opts.n_sigmas * sigma) * scale;
            p.add_constraint(coefficient_row(mu, nu, n), lower, upper);
        }
    }
    Ok(p)
}

/// Yield program over `Y_ij`, one row per setting.
pub fn build_yield_constraints(
    obs: &DecoyObservations,
    intensities_alice: &[f64; NUM_INTENSITIES],
    intensities_bob: &[f64; NUM_INTENSITIES],
    opts: &DecoyOptions,
) -> Result<LpProblem, DecoyError> {
    build(obs, intensities_alice, intensities_bob, opts, |o| (o.gain, o.gain_sigma))
}

/// Error program over `b_ij = e_ij Y_ij`, one row per setting.
pub fn build_error_constraints(
    obs: &DecoyObservations,
    intensities_alice: &[f64; NUM_INTENSITIES],
    intensities_bob: &[f64; NUM_INTENSITIES],
    opts: &DecoyOptions,
) -> Result<LpProblem, DecoyError> {
    build(obs, intensities_alice, intensities_bob, opts, |o| {
        (o.error_gain, o.error_gain_sigma)
    })
}

/// Outcome of one of the three programs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpReport {
    pub program: String,
    pub status: LpStatus,
    pub value: f64,
    pub iterations: usize,
    /// Rows with an active bound at the optimum.
    pub binding_rows: usize,
    /// Largest truncation slack added to any row.
    pub max_tail: f64,
    /// Largest relative constraint violation of the returned vertex.
    pub max_violation: f64,
}

/// Bounds produced by the three decoy programs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoyEstimate {
    /// Lower bound on `Y11` from the Z-basis yield program.
    pub y11_lower: f64,
    /// Upper bound on `e11`: `max b11 / min Y11`, both from X-basis data.
    pub e11_upper: f64,
    pub y11_lower_x: f64,
    pub b11_upper: f64,
    pub y11_clamped: bool,
    pub e11_clamped: bool,
    pub photon_cutoff: usize,
    pub n_sigmas: f64,
    pub z_yield: LpReport,
    pub x_yield: LpReport,
    pub x_error: LpReport,
}

const Z_YIELD: &str = "Z-basis yield program";
const X_YIELD: &str = "X-basis yield program";
const X_ERROR: &str = "X-basis error program";

fn run(
    program: &'static str,
    problem: &LpProblem,
    sense: Sense,
    target: usize,
    intensities: (&[f64; 4], &[f64; 4]),
    opts: &DecoyOptions,
) -> Result<LpReport, DecoyError> {
    let sol: LpSolution = solve_lp(problem, sense, &Objective::Variable(target))?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(DecoyError::Infeasible {
                program,
                n_sigmas: opts.n_sigmas,
                cutoff: opts.photon_cutoff,
            })
        }
        LpStatus::Unbounded => return Err(DecoyError::Unbounded { program }),
    }
    let x = sol.x.as_ref().expect("optimal solutions carry a vertex");
    let binding_rows = problem
        .constraints()
        .iter()
        .enumerate()
        .filter(|(r, c)| {
            let act = problem.activity(*r, x);
            let tol = 1e-9 * c.lower.abs().max(c.upper.abs()).max(1e-300);
            (act - c.lower).abs() <= tol || (act - c.upper).abs() <= tol
        })
        .count();
    let max_tail = intensities
        .0
        .iter()
        .flat_map(|&mu| intensities.1.iter().map(move |&nu| truncation_tail(mu, nu, opts.photon_cutoff)))
        .fold(0.0, f64::max);
    Ok(LpReport {
        program: program.to_string(),
        status: sol.status,
        value: sol.value.expect("optimal solutions carry a value"),
        iterations: sol.iterations,
        binding_rows,
        max_tail,
        max_violation: problem.max_violation(x),
    })
}

/// Solves the Z yield, X yield and X error programs.
pub fn estimate(
    z: &DecoyObservations,
    x: &DecoyObservations,
    intensities_alice: &[f64; NUM_INTENSITIES],
    intensities_bob: &[f64; NUM_INTENSITIES],
    opts: &DecoyOptions,
) -> Result<DecoyEstimate, DecoyError> {
    let n = opts.photon_cutoff;
    let y11 = var_index(1, 1, n.max(2));
    let intens = (intensities_alice, intensities_bob);
    let z_problem = build_yield_constraints(z, intensities_alice, intensities_bob, opts)?;
    let xy_problem = build_yield_constraints(x, intensities_alice, intensities_bob, opts)?;
    let xe_problem = build_error_constraints(x, intensities_alice, intensities_bob, opts)?;

    let (z_yield, (x_yield, x_error)) = rayon::join(
        || run(Z_YIELD, &z_problem, Sense::Minimize, y11, intens, opts),
        || {
            rayon::join(
                || run(X_YIELD, &xy_problem, Sense::Minimize, y11, intens, opts),
                || run(X_ERROR, &xe_problem, Sense::Maximize, y11, intens, opts),
            )
        },
    );
    let (z_yield, x_yield, x_error) = (z_yield?, x_yield?, x_error?);

    let y11_raw = z_yield.value;
    let y11_lower = y11_raw.clamp(0.0, 1.0);
    let y11_lower_x = x_yield.value.clamp(0.0, 1.0);
    let b11_upper = x_error.value.clamp(0.0, 1.0);
    let ratio = if y11_lower_x > 0.0 {
        b11_upper / y11_lower_x
    } else {
        f64::INFINITY
    };
    let e11_upper = ratio.clamp(0.0, 1.0);

    Ok(DecoyEstimate {
        y11_lower,
        e11_upper,
        y11_lower_x,
        b11_upper,
        y11_clamped: y11_lower != y11_raw,
        e11_clamped: e11_upper != ratio,
        photon_cutoff: n,
        n_sigmas: opts.n_sigmas,
        z_yield,
        x_yield,
        x_error,
    })
}

/// Runs [`estimate`] on the Z and X cells of `rates` with the config's
/// intensities, cutoff and fluctuation width.
pub fn estimate_from_rates(rates: &RatesTable, cfg: &ExperimentConfig) -> Result<DecoyEstimate, DecoyError> {
    estimate(
        &DecoyObservations::from_rates(rates, Basis::Z),
        &DecoyObservations::from_rates(rates, Basis::X),
        &cfg.intensities_alice,
        &cfg.intensities_bob,
        &DecoyOptions::from_config(cfg),
    )
}
