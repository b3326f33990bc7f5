//! Small dense linear programs.
//!
//! Problems have box bounds on every variable and two-sided row constraints
//! `lower <= a . x <= upper`. They are solved with a bounded-variable primal
//! simplex on a dense tableau: each row gets a logical variable carrying the
//! row bounds, phase one drives artificial variables to zero, phase two
//! optimizes the objective. Rows and columns are equilibrated first so that
//! row bounds and column maxima are of order one; the decoy programs mix
//! coefficients from 1 down to 1e-18.

use std::fmt;

/// One row `lower <= coeffs . x <= upper`. Either side may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    num_vars: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    constraints: Vec<LinearConstraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// A single variable.
    Variable(usize),
    /// A dense linear form over all variables.
    Linear(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Most negative reduced cost, with a Harris ratio test. Falls back to
    /// Bland's rule during long runs of degenerate pivots.
    #[default]
    Dantzig,
    /// Smallest eligible index for both entering and leaving variables.
    Bland,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub pivot_rule: PivotRule,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            pivot_rule: PivotRule::Dantzig,
            max_iterations: 50_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

/// Result of a solve. `value` and `x` are present only when optimal.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex did not terminate within {0} iterations")]
    IterationLimit(usize),
}

impl LpProblem {
    /// A problem with `num_vars` variables bounded to `[0, inf)` and no rows.
    pub fn new(num_vars: usize) -> Self {
        LpProblem {
            num_vars,
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, lower: f64, upper: f64) {
        self.constraints.push(LinearConstraint { coeffs, lower, upper });
    }

    /// Checks dimensions, finiteness of coefficients and bound ordering.
    pub fn check(&self) -> Result<(), LpError> {
        let bad = |msg: String| Err(LpError::Malformed(msg));
        for j in 0..self.num_vars {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return bad(format!("variable {j} has bounds [{lo}, {hi}]"));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != self.num_vars {
                return bad(format!(
                    "row {i} has {} coefficients, expected {}",
                    c.coeffs.len(),
                    self.num_vars
                ));
            }
            if let Some(j) = c.coeffs.iter().position(|a| !a.is_finite()) {
                return bad(format!("row {i} coefficient {j} is {}", c.coeffs[j]));
            }
            if c.lower.is_nan() || c.upper.is_nan() || c.lower > c.upper {
                return bad(format!("row {i} has bounds [{}, {}]", c.lower, c.upper));
            }
        }
        Ok(())
    }

    /// `coeffs . x` for row `row`.
    pub fn activity(&self, row: usize, x: &[f64]) -> f64 {
        self.constraints[row].coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// Largest relative violation of any row or variable bound at `x`.
    ///
    /// Row violations are measured against `|bound| + sum |a_j x_j|`;
    /// variable violations against `max(1, |bound|)`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            let below = (self.lower[j] - v) / self.lower[j].abs().max(1.0);
            let above = (v - self.upper[j]) / self.upper[j].abs().max(1.0);
            worst = worst.max(below).max(above);
        }
        for c in &self.constraints {
            let act: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let mag: f64 = c.coeffs.iter().zip(x).map(|(a, v)| (a * v).abs()).sum();
            if act < c.lower {
                worst = worst.max((c.lower - act) / (c.lower.abs() + mag).max(f64::MIN_POSITIVE));
            }
            if act > c.upper {
                worst = worst.max((act - c.upper) / (c.upper.abs() + mag).max(f64::MIN_POSITIVE));
            }
        }
        worst
    }
}

pub fn solve_lp(problem: &LpProblem, sense: Sense, objective: &Objective) -> Result<LpSolution, LpError> {
    solve_lp_with(problem, sense, objective, &SolverOptions::default())
}

pub fn solve_lp_with(
    problem: &LpProblem,
    sense: Sense,
    objective: &Objective,
    options: &SolverOptions,
) -> Result<LpSolution, LpError> {
    problem.check()?;
    let n = problem.num_vars;
    let cost: Vec<f64> = match objective {
        Objective::Variable(j) => {
            if *j >= n {
                return Err(LpError::Malformed(format!("objective variable {j} out of range")));
            }
            let mut c = vec![0.0; n];
            c[*j] = 1.0;
            c
        }
        Objective::Linear(c) => {
            if c.len() != n || c.iter().any(|v| !v.is_finite()) {
                return Err(LpError::Malformed("objective must have one finite coefficient per variable".into()));
            }
            c.clone()
        }
    };
    let sign = match sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };

    let mut tab = Tableau::build(problem);
    let mut iterations = 0;

    // phase one
    let phase1: Vec<f64> = (0..tab.ncols)
        .map(|c| if tab.is_artificial(c) && tab.pos[c].is_some() { 1.0 } else { 0.0 })
        .collect();
    if phase1.iter().any(|&c| c > 0.0) {
        tab.optimize(&phase1, options, &mut iterations)?;
        let infeasible = (0..tab.ncols)
            .filter(|&c| tab.is_artificial(c))
            .any(|c| tab.value[c] > FEAS_TOL);
        if infeasible {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                value: None,
                x: None,
                iterations,
            });
        }
    }
    tab.fix_artificials();

    // phase two
    let mut scaled_cost = vec![0.0; tab.ncols];
    for j in 0..n {
        scaled_cost[j] = sign * cost[j] / tab.col_scale[j];
    }
    let norm = scaled_cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if norm > 0.0 {
        scaled_cost.iter_mut().for_each(|c| *c /= norm);
    }
    if tab.optimize(&scaled_cost, options, &mut iterations)? == PhaseEnd::Unbounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            value: None,
            x: None,
            iterations,
        });
    }

    let x: Vec<f64> = (0..n)
        .map(|j| {
            let v = tab.value[j] / tab.col_scale[j];
            // snap onto bounds crossed by rounding
            v.clamp(problem.lower[j], problem.upper[j])
        })
        .collect();
    let value = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value: Some(value),
        x: Some(x),
        iterations,
    })
}

const FEAS_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-11;
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, PartialEq, Eq)]
enum PhaseEnd {
    Optimal,
    Unbounded,
}

/// Dense tableau `B^-1 [A | -I | S]` over structural, logical and
/// artificial columns, with the current value of every column.
struct Tableau {
    m: usize,
    n: usize,
    ncols: usize,
    t: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    value: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<Option<usize>>,
    col_scale: Vec<f64>,
}

impl Tableau {
    fn build(p: &LpProblem) -> Self {
        let n = p.num_vars;
        let m = p.constraints.len();
        let ncols = n + 2 * m;

        // rows scaled by their bound magnitude, columns by their largest entry
        let row_scale: Vec<f64> = p
            .constraints
            .iter()
            .map(|c| {
                let b = [c.lower, c.upper]
                    .iter()
                    .filter(|v| v.is_finite())
                    .fold(0.0f64, |acc, v| acc.max(v.abs()));
                let a = c.coeffs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                if b > 0.0 {
                    b
                } else if a > 0.0 {
                    a
                } else {
                    1.0
                }
            })
            .collect();
        let col_scale: Vec<f64> = (0..n)
            .map(|j| {
                let s = p
                    .constraints
                    .iter()
                    .zip(&row_scale)
                    .fold(0.0f64, |acc, (c, r)| acc.max((c.coeffs[j] / r).abs()));
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();

        let mut lo = vec![0.0; ncols];
        let mut hi = vec![0.0; ncols];
        let mut value = vec![0.0; ncols];
        for j in 0..n {
            lo[j] = p.lower[j] * col_scale[j];
            hi[j] = p.upper[j] * col_scale[j];
            value[j] = if lo[j].is_finite() {
                lo[j]
            } else if hi[j].is_finite() {
                hi[j]
            } else {
                0.0
            };
        }

        let mut t = vec![0.0; m * ncols];
        let mut basis = vec![0; m];
        let mut pos = vec![None; ncols];
        for (i, c) in p.constraints.iter().enumerate() {
            let row = &mut t[i * ncols..(i + 1) * ncols];
            let mut act = 0.0;
            for j in 0..n {
                row[j] = c.coeffs[j] / row_scale[i] / col_scale[j];
                act += row[j] * value[j];
            }
            let s = n + i;
            let a = n + m + i;
            lo[s] = c.lower / row_scale[i];
            hi[s] = c.upper / row_scale[i];
            row[s] = -1.0;
            if act >= lo[s] && act <= hi[s] {
                // logical variable starts basic; artificial unused
                row[a] = 1.0;
                row.iter_mut().for_each(|v| *v = -*v);
                basis[i] = s;
                pos[s] = Some(i);
                value[s] = act;
                lo[a] = 0.0;
                hi[a] = 0.0;
            } else {
                let target = if act < lo[s] { lo[s] } else { hi[s] };
                value[s] = target;
                // act - target + sigma * art = 0 with art >= 0
                let sigma = if act > target { -1.0 } else { 1.0 };
                row[a] = sigma;
                row.iter_mut().for_each(|v| *v *= sigma);
                basis[i] = a;
                pos[a] = Some(i);
                value[a] = (act - target).abs();
                lo[a] = 0.0;
                hi[a] = f64::INFINITY;
            }
        }

        Tableau {
            m,
            n,
            ncols,
            t,
            lo,
            hi,
            value,
            basis,
            pos,
            col_scale,
        }
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= self.n + self.m
    }

    fn fix_artificials(&mut self) {
        for c in self.n + self.m..self.ncols {
            self.lo[c] = 0.0;
            self.hi[c] = 0.0;
            if self.pos[c].is_none() {
                self.value[c] = 0.0;
            }
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.ncols + j]
    }

    fn refresh_basic_values(&mut self) {
        for i in 0..self.m {
            let row = &self.t[i * self.ncols..(i + 1) * self.ncols];
            let mut v = 0.0;
            for (j, &a) in row.iter().enumerate() {
                if self.pos[j].is_none() && a != 0.0 {
                    v -= a * self.value[j];
                }
            }
            self.value[self.basis[i]] = v;
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let nc = self.ncols;
        let piv = self.at(r, e);
        for v in &mut self.t[r * nc..(r + 1) * nc] {
            *v /= piv;
        }
        let pivot_row: Vec<f64> = self.t[r * nc..(r + 1) * nc].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + e];
            if f != 0.0 {
                for (v, p) in self.t[i * nc..(i + 1) * nc].iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                self.t[i * nc + e] = 0.0;
            }
        }
        let leaving = self.basis[r];
        self.pos[leaving] = None;
        self.basis[r] = e;
        self.pos[e] = Some(r);
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (dj, a) in d.iter_mut().zip(&self.t[i * self.ncols..(i + 1) * self.ncols]) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    /// Entering column and direction (+1 increase, -1 decrease).
    fn choose_entering(&self, d: &[f64], bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols {
            if self.pos[j].is_some() || self.lo[j] == self.hi[j] {
                continue;
            }
            let can_inc = self.value[j] < self.hi[j];
            let can_dec = self.value[j] > self.lo[j];
            let dir = if d[j] < -DUAL_TOL && can_inc {
                1.0
            } else if d[j] > DUAL_TOL && can_dec {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, s)| d[j].abs() > s) {
                best = Some((j, dir, d[j].abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Leaving row and step length; `None` row means a bound flip.
    fn ratio_test(&self, e: usize, dir: f64, bland: bool) -> Option<(Option<usize>, f64)> {
        let mut limits: Vec<(usize, f64, f64, f64)> = Vec::new(); // row, ratio, |alpha|, harris ratio
        for i in 0..self.m {
            let alpha = dir * self.at(i, e);
            let b = self.basis[i];
            let (dist, bound) = if alpha > PIVOT_TOL {
                (self.value[b] - self.lo[b], self.lo[b])
            } else if alpha < -PIVOT_TOL {
                (self.hi[b] - self.value[b], self.hi[b])
            } else {
                continue;
            };
            if !bound.is_finite() {
                continue;
            }
            let a = alpha.abs();
            let dist = dist.max(0.0);
            let tol = FEAS_TOL * bound.abs().max(1.0);
            limits.push((i, dist / a, a, (dist + tol) / a));
        }
        let flip = self.hi[e] - self.lo[e];

        let chosen = if bland {
            let min = limits.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
            limits
                .iter()
                .filter(|l| l.1 <= min)
                .min_by_key(|l| self.basis[l.0])
                .map(|l| (l.0, l.1))
        } else {
            let harris = limits.iter().map(|l| l.3).fold(f64::INFINITY, f64::min);
            limits
                .iter()
                .filter(|l| l.1 <= harris)
                .max_by(|a, b| a.2.total_cmp(&b.2))
                .map(|l| (l.0, l.1))
        };

        match chosen {
            Some((_, step)) if flip <= step => Some((None, flip)),
            Some((row, step)) => Some((Some(row), step)),
            None if flip.is_finite() => Some((None, flip)),
            None => None,
        }
    }

    fn optimize(&mut self, cost: &[f64], options: &SolverOptions, iterations: &mut usize) -> Result<PhaseEnd, LpError> {
        let mut degenerate = 0;
        loop {
            if *iterations >= options.max_iterations {
                return Err(LpError::IterationLimit(options.max_iterations));
            }
            *iterations += 1;
            let bland = options.pivot_rule == PivotRule::Bland || degenerate >= DEGENERATE_STREAK;
            let d = self.reduced_costs(cost);
            let Some((e, dir)) = self.choose_entering(&d, bland) else {
                return Ok(PhaseEnd::Optimal);
            };
            let Some((row, step)) = self.ratio_test(e, dir, bland) else {
                return Ok(PhaseEnd::Unbounded);
            };
            if step <= 1e-14 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            match row {
                None => {
                    self.value[e] = if dir > 0.0 { self.hi[e] } else { self.lo[e] };
                }
                Some(r) => {
                    let leaving = self.basis[r];
                    let alpha = dir * self.at(r, e);
                    self.value[e] += dir * step;
                    self.value[leaving] = if alpha > 0.0 { self.lo[leaving] } else { self.hi[leaving] };
                    self.pivot(r, e);
                }
            }
            self.refresh_basic_values();
        }
    }
}
