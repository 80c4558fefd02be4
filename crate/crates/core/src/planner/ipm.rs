//! Primal-dual interior-point method for smooth convex objectives under
//! linear inequalities `C x <= e`.
//!
//! Newton steps on the perturbed KKT system use a Mehrotra predictor and
//! corrector sharing one Cholesky factorization of
//! `grad^2 f + C^T diag(z / s) C`. The start may be infeasible; slacks and
//! multipliers are kept strictly positive by a fraction-to-boundary rule and
//! a backtracking search on the KKT residual norm.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smooth convex objective. `value` must be finite everywhere the solver
/// can step.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    /// Gradient and Hessian at `x`.
    fn derivatives(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>);
}

/// `0.5 x^T P x + q^T x`
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.q.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }

    fn derivatives(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        (&self.p * x + &self.q, self.p.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseRow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, i: usize, v: f64) {
        if v != 0.0 {
            self.idx.push(i);
            self.val.push(v);
        }
    }

    pub fn dot(&self, x: &DVector<f64>) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, v)| v * x[i]).sum()
    }
}

/// Rows of `C x <= e`.
#[derive(Debug, Clone, Default)]
pub struct LinearInequalities {
    pub rows: Vec<SparseRow>,
    pub rhs: Vec<f64>,
}

impl LinearInequalities {
    pub fn push(&mut self, row: SparseRow, rhs: f64) {
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.dot(x)))
    }

    fn apply_transpose(&self, y: &DVector<f64>, n: usize) -> DVector<f64> {
        let mut out = DVector::zeros(n);
        for (r, &yi) in self.rows.iter().zip(y.iter()) {
            for (&i, v) in r.idx.iter().zip(&r.val) {
                out[i] += v * yi;
            }
        }
        out
    }

    /// Largest violation `max(C x - e)` (negative when strictly feasible).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        self.rows.iter().zip(&self.rhs).map(|(r, e)| r.dot(x) - e).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `|| grad f + C^T z ||_inf`
    pub stationarity: f64,
    /// `max(0, max(C x - e))`
    pub primal: f64,
    /// `max(0, -min z)`
    pub dual: f64,
    /// `max |z_i (e - C x)_i|`
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }
}

#[derive(Debug, Clone)]
pub struct IpmSolution {
    pub x: DVector<f64>,
    /// Inequality multipliers.
    pub z: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub residuals: KktResiduals,
}

/// KKT residuals of `(x, z)` measured on the original problem.
pub fn kkt_residuals(obj: &dyn Objective, cons: &LinearInequalities, x: &DVector<f64>, z: &DVector<f64>) -> KktResiduals {
    let (g, _) = obj.derivatives(x);
    let stat = g + cons.apply_transpose(z, x.len());
    let slack: Vec<f64> = cons.rows.iter().zip(&cons.rhs).map(|(r, e)| e - r.dot(x)).collect();
    KktResiduals {
        stationarity: stat.amax(),
        primal: slack.iter().fold(0.0f64, |m, s| m.max(-s)),
        dual: z.iter().fold(0.0f64, |m, zi| m.max(-zi)),
        complementarity: slack.iter().zip(z.iter()).fold(0.0f64, |m, (s, zi)| m.max((s * zi).abs())),
    }
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(vi, d)| -vi / d)
        .fold(1.0f64, f64::min)
}

struct Residuals {
    rd: DVector<f64>,
    rp: DVector<f64>,
}

fn residuals(
    obj: &dyn Objective,
    cons: &LinearInequalities,
    x: &DVector<f64>,
    s: &DVector<f64>,
    z: &DVector<f64>,
) -> (Residuals, DMatrix<f64>) {
    let (g, h) = obj.derivatives(x);
    let rd = g + cons.apply_transpose(z, x.len());
    let e = DVector::from_column_slice(&cons.rhs);
    let rp = cons.apply(x) + s - e;
    (Residuals { rd, rp }, h)
}

fn merit(r: &Residuals, s: &DVector<f64>, z: &DVector<f64>, mu_target: f64) -> f64 {
    let rc: f64 = s.iter().zip(z.iter()).map(|(a, b)| (a * b - mu_target).powi(2)).sum();
    (r.rd.norm_squared() + r.rp.norm_squared() + rc).sqrt()
}

pub fn solve(obj: &dyn Objective, cons: &LinearInequalities, x0: &DVector<f64>, opts: &IpmOptions) -> Result<IpmSolution> {
    let n = obj.dim();
    let m = cons.len();
    if x0.len() != n {
        return Err(Error::LengthMismatch { left: x0.len(), right: n });
    }
    let mut x = x0.clone();
    let cx = cons.apply(&x);
    let mut s = DVector::from_iterator(m, cons.rhs.iter().zip(cx.iter()).map(|(e, c)| (e - c).max(1e-2)));
    let mut z = DVector::from_element(m, 1.0);

    for it in 0..opts.max_iterations {
        let (res, hess) = residuals(obj, cons, &x, &s, &z);
        let mu = if m > 0 { s.dot(&z) / m as f64 } else { 0.0 };
        if res.rd.amax() <= opts.tolerance && res.rp.amax() <= opts.tolerance && mu <= 0.1 * opts.tolerance {
            let residuals = kkt_residuals(obj, cons, &x, &z);
            return Ok(IpmSolution { objective: obj.value(&x), x, z, iterations: it, residuals });
        }

        // Reduced Newton matrix.
        let w: DVector<f64> = z.component_div(&s);
        let mut kkt = hess;
        for (row, &wi) in cons.rows.iter().zip(w.iter()) {
            for (a, &ia) in row.idx.iter().enumerate() {
                let va = row.val[a] * wi;
                for (b, &ib) in row.idx.iter().enumerate() {
                    kkt[(ia, ib)] += va * row.val[b];
                }
            }
        }
        let chol = factor(kkt)?;

        let newton = |rc: &DVector<f64>| -> (DVector<f64>, DVector<f64>, DVector<f64>) {
            // dz = W (C dx + rp) - rc / s ; ds = -rp - C dx
            let t: DVector<f64> = w.component_mul(&res.rp) - rc.component_div(&s);
            let rhs = -&res.rd - cons.apply_transpose(&t, n);
            let dx = chol.solve(&rhs);
            let cdx = cons.apply(&dx);
            let dz = w.component_mul(&(&cdx + &res.rp)) - rc.component_div(&s);
            let ds = -&res.rp - cdx;
            (dx, ds, dz)
        };

        // Predictor.
        let rc_aff = s.component_mul(&z);
        let (_, ds_a, dz_a) = newton(&rc_aff);
        let a_aff = max_step(&s, &ds_a).min(max_step(&z, &dz_a));
        let mu_aff = if m > 0 {
            (&s + &ds_a * a_aff).dot(&(&z + &dz_a * a_aff)) / m as f64
        } else {
            0.0
        };
        let sigma = if mu > 0.0 { (mu_aff / mu).powi(3).clamp(0.0, 1.0) } else { 0.0 };
        // Corrector.
        let rc = s.component_mul(&z) + ds_a.component_mul(&dz_a) - DVector::from_element(m, sigma * mu);
        let (dx, ds, dz) = newton(&rc);

        let mut alpha = (0.99 * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);
        let target = sigma * mu;
        let m0 = merit(&res, &s, &z, target);
        let mut accepted = false;
        for _ in 0..40 {
            let xn = &x + &dx * alpha;
            let sn = &s + &ds * alpha;
            let zn = &z + &dz * alpha;
            if obj.value(&xn).is_finite() {
                let (rn, _) = residuals(obj, cons, &xn, &sn, &zn);
                if merit(&rn, &sn, &zn, target) <= (1.0 - 1e-4 * alpha) * m0 || alpha < 1e-10 {
                    x = xn;
                    s = sn;
                    z = zn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            let r = kkt_residuals(obj, cons, &x, &z);
            return Err(Error::SolverFailure(format!("line search stalled at iteration {it}: {r:?}")));
        }
    }
    let r = kkt_residuals(obj, cons, &x, &z);
    Err(Error::SolverFailure(format!(
        "no convergence in {} iterations (primal {:.3e}, stationarity {:.3e}, complementarity {:.3e})",
        opts.max_iterations, r.primal, r.stationarity, r.complementarity
    )))
}

fn factor(mut m: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    let scale = m.diagonal().amax().max(1.0);
    let mut reg = 0.0;
    for _ in 0..12 {
        if let Some(c) = m.clone().cholesky() {
            return Ok(c);
        }
        let next = if reg == 0.0 { 1e-12 * scale } else { reg * 100.0 };
        for i in 0..n {
            m[(i, i)] += next - reg;
        }
        reg = next;
    }
    Err(Error::SolverFailure("Newton system is not positive definite".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn box_rows(n: usize, lo: f64, hi: f64) -> LinearInequalities {
        let mut c = LinearInequalities::default();
        for i in 0..n {
            let mut r = SparseRow::new();
            r.push(i, 1.0);
            c.push(r, hi);
            let mut r = SparseRow::new();
            r.push(i, -1.0);
            c.push(r, -lo);
        }
        c
    }

    #[test]
    fn unconstrained_least_squares() {
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let q = DVector::from_vec(vec![-1.0, 0.3]);
        let obj = QuadraticObjective { p: p.clone(), q: q.clone() };
        let sol = solve(&obj, &LinearInequalities::default(), &DVector::zeros(2), &IpmOptions::default()).unwrap();
        let exact = p.lu().solve(&(-q)).unwrap();
        assert_relative_eq!(sol.x, exact, epsilon = 1e-10);
    }

    #[test]
    fn active_box_has_nonnegative_multiplier() {
        let obj = QuadraticObjective { p: DMatrix::identity(1, 1), q: DVector::from_vec(vec![-3.0]) };
        let sol = solve(&obj, &box_rows(1, -1.0, 1.0), &DVector::zeros(1), &IpmOptions::default()).unwrap();
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-7);
        assert!(sol.z[0] > 1.0 && sol.z[1] >= 0.0);
        assert_relative_eq!(sol.z[0], 2.0, epsilon = 1e-6);
        assert!(sol.residuals.max() < 1e-6);
    }

    #[test]
    fn infeasible_start_is_repaired() {
        let obj = QuadraticObjective { p: DMatrix::identity(2, 2), q: DVector::zeros(2) };
        let mut c = box_rows(2, 1.0, 2.0);
        let mut r = SparseRow::new();
        r.push(0, 1.0);
        r.push(1, 1.0);
        c.push(r, 3.5);
        let sol = solve(&obj, &c, &DVector::from_vec(vec![-5.0, 9.0]), &IpmOptions::default()).unwrap();
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-7);
        assert_relative_eq!(sol.x[1], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn infeasible_problem_fails() {
        let obj = QuadraticObjective { p: DMatrix::identity(1, 1), q: DVector::zeros(1) };
        let sol = solve(&obj, &box_rows(1, 2.0, 1.0), &DVector::zeros(1), &IpmOptions::default());
        assert!(matches!(sol, Err(Error::SolverFailure(_))));
    }
}
