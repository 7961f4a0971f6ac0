//! Log-barrier interior-point method for small dense problems of the form
//!
//! ```text
//! maximize  c^T x   subject to  g_k(x) > 0
//! ```
//!
//! where every `g_k` is a nonnegative combination of `log2` of affine
//! functions plus an affine part, hence concave.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LogTerm {
    /// Nonnegative.
    pub weight: f64,
    pub constant: f64,
    pub coeffs: DVector<f64>,
}

impl LogTerm {
    fn arg(&self, x: &DVector<f64>) -> f64 {
        self.constant + self.coeffs.dot(x)
    }
}

/// `sum_l w_l log2(c_l + a_l^T x) + b + d^T x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveFn {
    pub logs: Vec<LogTerm>,
    pub constant: f64,
    pub linear: DVector<f64>,
}

impl ConcaveFn {
    pub fn affine(constant: f64, linear: DVector<f64>) -> Self {
        Self { logs: Vec::new(), constant, linear }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    /// `None` outside the domain of a log term.
    pub fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let mut v = self.constant + self.linear.dot(x);
        for t in &self.logs {
            let a = t.arg(x);
            if !(a > 0.0) {
                return None;
            }
            v += t.weight * a.log2();
        }
        Some(v)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = self.linear.clone();
        for t in &self.logs {
            g.axpy(t.weight / (LN_2 * t.arg(x)), &t.coeffs, 1.0);
        }
        g
    }

    /// Hessian (negative semidefinite).
    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for t in &self.logs {
            let a = t.arg(x);
            h.ger(-t.weight / (LN_2 * a * a), &t.coeffs, &t.coeffs, 1.0);
        }
        h
    }

    /// Same function over `x` extended by trailing zero-coefficient variables.
    fn extended(&self, extra: usize) -> Self {
        let grow = |v: &DVector<f64>| v.clone().resize_vertically(v.len() + extra, 0.0);
        Self {
            logs: self
                .logs
                .iter()
                .map(|t| LogTerm { weight: t.weight, constant: t.constant, coeffs: grow(&t.coeffs) })
                .collect(),
            constant: self.constant,
            linear: grow(&self.linear),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptions {
    pub t0: f64,
    pub mu: f64,
    /// Stop once `m / t` falls below this.
    pub gap_tol: f64,
    /// Centering stops when half the squared Newton decrement is below this.
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self { t0: 1.0, mu: 10.0, gap_tol: 1e-7, newton_tol: 1e-20, max_newton: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSolution {
    pub x: DVector<f64>,
    /// Duality-gap bound `m / t` at exit.
    pub gap: f64,
    /// `||c + sum_k lambda_k grad g_k||` with `lambda_k = 1 / (t g_k)`, divided
    /// by `||c|| + sum_k ||lambda_k grad g_k||`.
    pub kkt_residual: f64,
    pub newton_steps: usize,
}

struct Problem<'a> {
    c: &'a DVector<f64>,
    constraints: &'a [ConcaveFn],
}

impl Problem<'_> {
    /// `-t c^T x - sum log g_k(x)`; `None` if not strictly feasible.
    fn phi(&self, x: &DVector<f64>, t: f64) -> Option<f64> {
        let mut v = -t * self.c.dot(x);
        for g in self.constraints {
            let gv = g.value(x)?;
            if !(gv > 0.0) {
                return None;
            }
            v -= gv.ln();
        }
        Some(v)
    }

    fn grad_hess(&self, x: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = x.len();
        let mut grad = self.c * -t;
        let mut hess = DMatrix::zeros(n, n);
        for g in self.constraints {
            let gv = g.value(x).expect("iterate stays in the domain");
            let dg = g.gradient(x);
            grad.axpy(-1.0 / gv, &dg, 1.0);
            hess.ger(1.0 / (gv * gv), &dg, &dg, 1.0);
            hess -= g.hessian(x) / gv;
        }
        (grad, hess)
    }

    /// Stationarity of the centered Lagrangian relative to the size of its
    /// terms. The absolute form bottoms out near `1e-7` when `eta / B` is
    /// large, since each link slack is then a difference of O(10) numbers.
    fn kkt_residual(&self, x: &DVector<f64>, t: f64) -> f64 {
        let mut r = self.c.clone();
        let mut scale = self.c.norm();
        for g in self.constraints {
            let gv = g.value(x).expect("iterate stays in the domain");
            let term = g.gradient(x) / (t * gv);
            scale += term.norm();
            r += term;
        }
        r.norm() / scale.max(f64::MIN_POSITIVE)
    }
}

fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Result<DVector<f64>> {
    // Symmetric diagonal equilibration before factoring: the box and cap
    // terms near their boundaries dwarf the rest of the Hessian.
    let d = hess.diagonal().map(|h| if h > 0.0 { 1.0 / h.sqrt() } else { 1.0 });
    let scaled = DMatrix::from_fn(hess.nrows(), hess.ncols(), |i, j| hess[(i, j)] * d[i] * d[j]);
    let rhs = -grad.component_mul(&d);
    let mut ridge = 0.0;
    for _ in 0..12 {
        let mut h = scaled.clone();
        for i in 0..h.nrows() {
            h[(i, i)] += ridge;
        }
        if let Some(ch) = h.cholesky() {
            return Ok(ch.solve(&rhs).component_mul(&d));
        }
        ridge = if ridge == 0.0 { 1e-14 } else { ridge * 100.0 };
    }
    Err(Error::ConvergenceFailure("barrier Hessian is not positive definite".into()))
}

/// Maximizes `c^T x` from a strictly feasible `x0`. `stop` is checked after
/// every Newton step and ends the solve early when it returns true.
pub fn maximize(
    c: &DVector<f64>,
    constraints: &[ConcaveFn],
    x0: DVector<f64>,
    opts: &BarrierOptions,
    stop: &dyn Fn(&DVector<f64>) -> bool,
) -> Result<BarrierSolution> {
    let prob = Problem { c, constraints };
    if prob.phi(&x0, opts.t0).is_none() {
        return Err(Error::Infeasible { family: "barrier start point is not strictly feasible".into() });
    }
    let m = constraints.len().max(1) as f64;
    let mut x = x0;
    let mut t = opts.t0;
    let mut steps = 0;
    loop {
        for _ in 0..opts.max_newton {
            let (grad, hess) = prob.grad_hess(&x, t);
            let dx = newton_direction(&grad, &hess)?;
            let decrement_sq = -grad.dot(&dx);
            if decrement_sq / 2.0 <= opts.newton_tol {
                break;
            }
            let phi0 = prob.phi(&x, t).expect("current iterate is feasible");
            let mut step = 1.0;
            let mut accepted = false;
            // Once the predicted decrease sinks below the rounding of phi the
            // Armijo test only sees noise; skip straight to the fallback.
            let resolvable = 0.25 * decrement_sq > 64.0 * f64::EPSILON * phi0.abs().max(1.0);
            while resolvable && step > 1e-20 {
                let trial = &x + &dx * step;
                if let Some(phi) = prob.phi(&trial, t) {
                    if phi <= phi0 - 0.25 * step * decrement_sq {
                        x = trial;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                // Near the optimum phi stops resolving the decrease; a full
                // step that still shrinks the gradient is taken anyway.
                let trial = &x + &dx;
                if prob.phi(&trial, t).is_some() && prob.grad_hess(&trial, t).0.norm() < grad.norm() {
                    x = trial;
                    accepted = true;
                }
            }
            steps += 1;
            if !accepted || stop(&x) {
                break;
            }
        }
        if stop(&x) || m / t <= opts.gap_tol {
            return Ok(BarrierSolution { kkt_residual: prob.kkt_residual(&x, t), x, gap: m / t, newton_steps: steps });
        }
        t *= opts.mu;
    }
}

/// Index of the constraint with the smallest value at `x`, or `None` when all
/// are strictly positive.
pub fn most_violated(constraints: &[ConcaveFn], x: &DVector<f64>) -> Option<usize> {
    let mut worst: Option<(usize, f64)> = None;
    for (k, g) in constraints.iter().enumerate() {
        let v = g.value(x).unwrap_or(f64::NEG_INFINITY);
        if !(v > 0.0) && worst.map_or(true, |(_, w)| v < w) {
            worst = Some((k, v));
        }
    }
    worst.map(|(k, _)| k)
}

/// Finds a strictly feasible point by maximizing `-s` subject to
/// `g_k(x) + s > 0`, starting from `x0` (which must lie in every log domain).
/// Returns `Err(index)` with the most violated constraint when none exists.
pub fn phase_one(
    constraints: &[ConcaveFn],
    x0: &DVector<f64>,
    opts: &BarrierOptions,
) -> std::result::Result<DVector<f64>, usize> {
    let n = x0.len();
    let mut min_g = f64::INFINITY;
    for g in constraints {
        match g.value(x0) {
            Some(v) => min_g = min_g.min(v),
            None => return Err(most_violated(constraints, x0).unwrap_or(0)),
        }
    }
    if min_g > 0.0 {
        return Ok(x0.clone());
    }
    let lifted: Vec<ConcaveFn> = constraints
        .iter()
        .map(|g| {
            let mut e = g.extended(1);
            e.linear[n] = 1.0;
            e
        })
        .collect();
    let mut c = DVector::zeros(n + 1);
    c[n] = -1.0;
    let s0 = -min_g + 1.0;
    let start = x0.clone().resize_vertically(n + 1, s0);
    let margin = 1e-9;
    let stop = |z: &DVector<f64>| z[n] < -margin;
    let sol = maximize(&c, &lifted, start, opts, &stop).map_err(|_| most_violated(constraints, x0).unwrap_or(0))?;
    let x = sol.x.rows(0, n).into_owned();
    match most_violated(constraints, &x) {
        None => Ok(x),
        Some(k) => Err(k),
    }
}
