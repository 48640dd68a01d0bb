//! Dense linear programming for box-bounded problems with many inequality rows.
//!
//! Problems have the form
//!
//! ```text
//! maximize    c·x
//! subject to  A x ≤ b
//!             lo ≤ x ≤ hi      (finite)
//! ```
//!
//! Filter design produces a handful of variables and thousands of rows, so the
//! solver runs a revised primal simplex on the dual problem
//!
//! ```text
//! minimize    b·y + hi·u − lo·v
//! subject to  Aᵀ y + u − v = c,   y, u, v ≥ 0
//! ```
//!
//! whose basis is only `n × n`. The finite box means the slack columns `u`/`v`
//! always contain a feasible starting basis, so no phase one is needed. The
//! primal optimum is read back as the simplex multipliers of the dual.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Reduced-cost tolerance; a row with `a·x − b` above this is a violation.
const OPT_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;
const MAX_ITERATIONS: usize = 200_000;
/// Stalled iterations before switching to Bland's rule.
const STALL_LIMIT: usize = 64;
/// Relative size of the objective perturbation.
const PERTURBATION: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    rows: Vec<f64>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LinearProgram {
    /// A problem over `num_vars` variables, each boxed to `[lower, upper]`.
    pub fn new(num_vars: usize, lower: f64, upper: f64) -> Self {
        assert!(lower.is_finite() && upper.is_finite() && lower <= upper);
        Self { num_vars, rows: Vec::new(), rhs: Vec::new(), lower: vec![lower; num_vars], upper: vec![upper; num_vars] }
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        assert!(lower.is_finite() && upper.is_finite() && lower <= upper);
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    /// Adds `coeffs · x ≤ rhs`.
    pub fn add_le(&mut self, coeffs: &[f64], rhs: f64) {
        assert_eq!(coeffs.len(), self.num_vars);
        self.rows.extend_from_slice(coeffs);
        self.rhs.push(rhs);
    }

    /// Adds `lo ≤ coeffs · x ≤ hi` as two rows.
    pub fn add_range(&mut self, coeffs: &[f64], lo: f64, hi: f64) {
        self.add_le(coeffs, hi);
        let neg: Vec<f64> = coeffs.iter().map(|v| -v).collect();
        self.add_le(&neg, -lo);
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k * self.num_vars..(k + 1) * self.num_vars]
    }

    pub fn rhs(&self, k: usize) -> f64 {
        self.rhs[k]
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    /// Largest violation of any row or bound at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = (0..self.num_rows()).map(|k| dot(self.row(k), x) - self.rhs[k]);
        let boxes = (0..self.num_vars).flat_map(|j| [x[j] - self.upper[j], self.lower[j] - x[j]]);
        rows.chain(boxes).fold(0.0, f64::max)
    }

    pub fn maximize(&self, objective: &[f64]) -> Result<LpSolution> {
        assert_eq!(objective.len(), self.num_vars);
        DualSimplex::new(self, objective).run()
    }

    pub fn minimize(&self, objective: &[f64]) -> Result<LpSolution> {
        let neg: Vec<f64> = objective.iter().map(|v| -v).collect();
        let mut sol = self.maximize(&neg)?;
        sol.objective = -sol.objective;
        Ok(sol)
    }
}

/// Deterministic weight in `[0, 1)` for the perturbation of component `j`.
fn perturbation_weight(j: usize) -> f64 {
    let mut z = (j as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dual column identifiers: rows first, then upper-bound then lower-bound slacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Column {
    Row(usize),
    Upper(usize),
    Lower(usize),
}

struct DualSimplex<'a> {
    lp: &'a LinearProgram,
    objective: &'a [f64],
    /// Objective with a tiny deterministic perturbation that breaks the
    /// degeneracy of the all-slack starting basis.
    c: Vec<f64>,
    n: usize,
    basis: Vec<Column>,
    /// Row-major `n × n` inverse of the basis matrix.
    binv: Vec<f64>,
    xb: Vec<f64>,
}

impl<'a> DualSimplex<'a> {
    fn new(lp: &'a LinearProgram, objective: &'a [f64]) -> Self {
        let n = lp.num_vars;
        let scale = objective.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let c: Vec<f64> = objective
            .iter()
            .enumerate()
            .map(|(j, v)| v + PERTURBATION * scale * (1.0 + perturbation_weight(j)))
            .collect();
        let mut basis = Vec::with_capacity(n);
        let mut binv = vec![0.0; n * n];
        let mut xb = vec![0.0; n];
        for j in 0..n {
            if c[j] >= 0.0 {
                basis.push(Column::Upper(j));
                binv[j * n + j] = 1.0;
                xb[j] = c[j];
            } else {
                basis.push(Column::Lower(j));
                binv[j * n + j] = -1.0;
                xb[j] = -c[j];
            }
        }
        Self { lp, objective, c, n, basis, binv, xb }
    }

    fn cost(&self, col: Column) -> f64 {
        match col {
            Column::Row(k) => self.lp.rhs[k],
            Column::Upper(j) => self.lp.upper[j],
            Column::Lower(j) => -self.lp.lower[j],
        }
    }

    fn dense_column(&self, col: Column) -> Vec<f64> {
        match col {
            Column::Row(k) => self.lp.row(k).to_vec(),
            Column::Upper(j) => {
                let mut v = vec![0.0; self.n];
                v[j] = 1.0;
                v
            }
            Column::Lower(j) => {
                let mut v = vec![0.0; self.n];
                v[j] = -1.0;
                v
            }
        }
    }

    fn multipliers(&self) -> Vec<f64> {
        let n = self.n;
        let mut pi = vec![0.0; n];
        for (r, col) in self.basis.iter().enumerate() {
            let cb = self.cost(*col);
            if cb != 0.0 {
                let row = &self.binv[r * n..(r + 1) * n];
                for (p, b) in pi.iter_mut().zip(row) {
                    *p += cb * b;
                }
            }
        }
        pi
    }

    fn refactor(&mut self) -> Result<()> {
        let n = self.n;
        let mut b = DMatrix::<f64>::zeros(n, n);
        for (r, col) in self.basis.iter().enumerate() {
            for (i, v) in self.dense_column(*col).into_iter().enumerate() {
                b[(i, r)] = v;
            }
        }
        let inv = b.try_inverse().ok_or(Error::LpNumerical("singular basis"))?;
        for r in 0..n {
            for i in 0..n {
                self.binv[r * n + i] = inv[(r, i)];
            }
        }
        for r in 0..n {
            let v = dot(&self.binv[r * n..(r + 1) * n], &self.c);
            self.xb[r] = v.max(0.0);
        }
        Ok(())
    }

    /// Most negative reduced cost (or the first negative one under Bland's rule).
    fn price(&self, pi: &[f64], in_basis: &[bool], bland: bool) -> Option<Column> {
        let lp = self.lp;
        let m = lp.num_rows();
        let mut best: Option<(Column, f64)> = None;
        let mut consider = |col: Column, d: f64| {
            if d < -OPT_TOL && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((col, d));
            }
        };
        for k in 0..m {
            if in_basis[k] {
                continue;
            }
            let d = lp.rhs[k] - dot(lp.row(k), pi);
            if bland && d < -OPT_TOL {
                return Some(Column::Row(k));
            }
            consider(Column::Row(k), d);
        }
        for j in 0..self.n {
            if !in_basis[m + j] {
                let d = lp.upper[j] - pi[j];
                if bland && d < -OPT_TOL {
                    return Some(Column::Upper(j));
                }
                consider(Column::Upper(j), d);
            }
            if !in_basis[m + self.n + j] {
                let d = -lp.lower[j] + pi[j];
                if bland && d < -OPT_TOL {
                    return Some(Column::Lower(j));
                }
                consider(Column::Lower(j), d);
            }
        }
        best.map(|(c, _)| c)
    }

    fn slot(&self, col: Column) -> usize {
        let m = self.lp.num_rows();
        match col {
            Column::Row(k) => k,
            Column::Upper(j) => m + j,
            Column::Lower(j) => m + self.n + j,
        }
    }

    fn run(mut self) -> Result<LpSolution> {
        let n = self.n;
        let m = self.lp.num_rows();
        let mut in_basis = vec![false; m + 2 * n];
        for col in &self.basis {
            in_basis[self.slot(*col)] = true;
        }
        let mut last_obj = f64::INFINITY;
        let mut stalled = 0usize;
        let mut since_refactor = 0usize;
        let mut iterations = 0usize;
        loop {
            if iterations > MAX_ITERATIONS {
                return Err(Error::LpNumerical("iteration limit reached"));
            }
            let pi = self.multipliers();
            let obj: f64 = self.basis.iter().zip(&self.xb).map(|(c, x)| self.cost(*c) * x).sum();
            if obj < last_obj - 1e-12 {
                last_obj = obj;
                stalled = 0;
            } else {
                stalled += 1;
            }
            let bland = stalled > STALL_LIMIT;
            let entering = match self.price(&pi, &in_basis, bland) {
                Some(col) => col,
                None if since_refactor == 0 => {
                    let x = self.final_point()?;
                    let objective = dot(&x, self.objective);
                    return Ok(LpSolution { x, objective, iterations });
                }
                None => {
                    // Confirm optimality on a fresh factorization.
                    self.refactor()?;
                    since_refactor = 0;
                    continue;
                }
            };

            let a = self.dense_column(entering);
            let u: Vec<f64> = (0..n).map(|r| dot(&self.binv[r * n..(r + 1) * n], &a)).collect();
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..n {
                if u[r] > PIVOT_TOL {
                    let ratio = self.xb[r] / u[r];
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            let tie = ratio <= lratio + 1e-12;
                            ratio < lratio - 1e-12
                                || (tie && bland && self.basis[r] < self.basis[lr])
                                || (tie && !bland && u[r] > u[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            // Dual unbounded: the primal constraint set is empty.
            let Some((r, theta)) = leave else {
                return Err(Error::Infeasible);
            };

            for i in 0..n {
                self.xb[i] = (self.xb[i] - theta * u[i]).max(0.0);
            }
            self.xb[r] = theta;
            let pivot = u[r];
            for k in 0..n {
                self.binv[r * n + k] /= pivot;
            }
            let pivot_row: Vec<f64> = self.binv[r * n..(r + 1) * n].to_vec();
            for i in 0..n {
                if i != r && u[i] != 0.0 {
                    let f = u[i];
                    for k in 0..n {
                        self.binv[i * n + k] -= f * pivot_row[k];
                    }
                }
            }
            in_basis[self.slot(self.basis[r])] = false;
            in_basis[self.slot(entering)] = true;
            self.basis[r] = entering;

            iterations += 1;
            since_refactor += 1;
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
        }
    }

    /// Solves `Bᵀ x = c_B` on a fresh factorization.
    fn final_point(&self) -> Result<Vec<f64>> {
        let n = self.n;
        let mut bt = DMatrix::<f64>::zeros(n, n);
        let mut rhs = nalgebra::DVector::<f64>::zeros(n);
        for (r, col) in self.basis.iter().enumerate() {
            for (i, v) in self.dense_column(*col).into_iter().enumerate() {
                bt[(r, i)] = v;
            }
            rhs[r] = self.cost(*col);
        }
        let x = bt.lu().solve(&rhs).ok_or(Error::LpNumerical("singular final basis"))?;
        Ok(x.iter().copied().collect())
    }
}
