//! Linear quantile regression.
//!
//! The check-loss minimization `min sum rho_q(y_i - x_i b)` is a linear
//! program whose optimum is attained at a basic solution: a coefficient
//! vector that interpolates `p` observations. [`solve_quantile`] walks from
//! basis to basis along edges of that polytope (the descent used by
//! Barrodale-Roberts style simplex codes). At each basis it evaluates the
//! directional derivative of the loss for releasing every basis point up or
//! down, takes the steepest descending edge, and does an exact line search
//! over the breakpoints of the piecewise linear loss along it. Every step
//! strictly lowers the loss, so the walk cannot cycle and ends at a basic
//! optimum.
//!
//! Standard errors assume i.i.d. errors: `V = q (1 - q) s^2 (X'X)^-1`, with
//! the sparsity `s` estimated from fitted quantile lines at `q +- h`
//! evaluated at the mean regressor, `h` being the Hall-Sheather bandwidth.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::data::ModelFrame;
use crate::error::{Error, Result};
use crate::numerics::{normal_pdf, normal_quantile, solve_least_squares};

use super::{EstimatorKind, EstimatorSpec, FitResult};

/// Basic optimal solution of a quantile regression.
#[derive(Debug, Clone)]
pub struct QuantileSolution {
    pub beta: DVector<f64>,
    /// Rows interpolated exactly by `beta`.
    pub basis: Vec<usize>,
    /// Minimized `sum rho_q(residual)`.
    pub loss: f64,
    pub iterations: usize,
}

/// Check loss `rho_q`.
pub fn check_loss(r: f64, q: f64) -> f64 {
    if r >= 0.0 {
        q * r
    } else {
        (q - 1.0) * r
    }
}

/// Pick `p` linearly independent rows, preferring rows with small residual
/// from a least-squares fit.
fn initial_basis(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Vec<usize>> {
    let (n, p) = x.shape();
    let mut order: Vec<usize> = (0..n).collect();
    if let Ok(ls) = solve_least_squares(x, y) {
        let resid = y - x * &ls.beta;
        order.sort_by(|&a, &b| resid[a].abs().total_cmp(&resid[b].abs()).then(a.cmp(&b)));
    }
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(p);
    let mut basis = Vec::with_capacity(p);
    for i in order {
        let xi = x.row(i).transpose();
        let norm = xi.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = xi.clone();
        for u in &ortho {
            let proj = u.dot(&v);
            v -= u * proj;
        }
        let vn = v.norm();
        if vn > 1e-9 * norm {
            ortho.push(v / vn);
            basis.push(i);
            if basis.len() == p {
                return Ok(basis);
            }
        }
    }
    Err(Error::Degenerate(format!(
        "design has rank {} < {p}; no basic solution exists",
        basis.len()
    )))
}

/// Exact minimizer of the check loss at quantile `q`.
pub fn solve_quantile(x: &DMatrix<f64>, y: &DVector<f64>, q: f64) -> Result<QuantileSolution> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile must lie in (0, 1), got {q}")));
    }
    let (n, p) = x.shape();
    if n < p || p == 0 {
        return Err(Error::InsufficientObservations(format!("{n} rows for {p} parameters")));
    }
    let mut basis = initial_basis(x, y)?;
    let y_scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs())) + 1.0;
    let zero_tol = 1e-11 * y_scale;
    let max_iter = 100 * n + 1000;

    for iteration in 0..max_iter {
        let xb = DMatrix::from_fn(p, p, |i, j| x[(basis[i], j)]);
        let yb = DVector::from_fn(p, |i, _| y[basis[i]]);
        let lu = xb.lu();
        let beta = lu
            .solve(&yb)
            .ok_or_else(|| Error::Degenerate("singular basis".into()))?;
        let binv = lu
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular basis".into()))?;
        let mut resid = y - x * &beta;
        let mut in_basis = vec![false; n];
        for &b in &basis {
            in_basis[b] = true;
            resid[b] = 0.0;
        }

        // steepest descending edge
        let mut best: Option<(f64, usize, f64, DVector<f64>)> = None;
        for j in 0..p {
            let d = binv.column(j).into_owned();
            let a = x * &d;
            for sigma in [1.0, -1.0] {
                // releasing basis point j: its residual becomes -t * sigma
                let mut slope = if sigma > 0.0 { 1.0 - q } else { q };
                for i in (0..n).filter(|&i| !in_basis[i]) {
                    let ai = sigma * a[i];
                    let r = resid[i];
                    slope += if r.abs() <= zero_tol {
                        (-q * ai).max((1.0 - q) * ai)
                    } else if r > 0.0 {
                        -q * ai
                    } else {
                        (1.0 - q) * ai
                    };
                }
                if slope < -1e-12 && best.as_ref().is_none_or(|b| slope < b.0) {
                    best = Some((slope, j, sigma, a.clone()));
                }
            }
        }

        let Some((slope0, leave, sigma, a)) = best else {
            let loss = resid.iter().map(|&r| check_loss(r, q)).sum();
            return Ok(QuantileSolution {
                beta,
                basis,
                loss,
                iterations: iteration,
            });
        };

        // exact line search over breakpoints t_i = r_i / (sigma a_i) > 0
        let mut breaks: Vec<(f64, usize)> = (0..n)
            .filter(|&i| !in_basis[i] && resid[i].abs() > zero_tol && a[i] != 0.0)
            .filter_map(|i| {
                let t = resid[i] / (sigma * a[i]);
                (t > 0.0).then_some((t, i))
            })
            .collect();
        breaks.sort_by(|u, v| u.0.partial_cmp(&v.0).unwrap_or(Ordering::Equal).then(u.1.cmp(&v.1)));
        let mut slope = slope0;
        let mut entering = None;
        for &(_, i) in &breaks {
            slope += a[i].abs();
            if slope >= 0.0 {
                entering = Some(i);
                break;
            }
        }
        let entering = entering
            .ok_or_else(|| Error::Degenerate("check loss unbounded along an edge".into()))?;
        basis[leave] = entering;
    }
    Err(Error::Degenerate(format!(
        "quantile regression did not reach an optimum within {max_iter} pivots"
    )))
}

/// Hall-Sheather (1988) bandwidth at significance 0.05.
pub fn hall_sheather_bandwidth(q: f64, n: usize) -> f64 {
    let x0 = normal_quantile(q);
    let f0 = normal_pdf(x0);
    let z = normal_quantile(0.975);
    (n as f64).powf(-1.0 / 3.0)
        * z.powf(2.0 / 3.0)
        * (1.5 * f0 * f0 / (2.0 * x0 * x0 + 1.0)).powf(1.0 / 3.0)
}

/// Quantile regression at `spec.q` with i.i.d. sparsity standard errors.
pub fn fit_qreg(frame: &ModelFrame, spec: &EstimatorSpec) -> Result<FitResult> {
    spec.validate()?;
    frame.require_estimable()?;
    let names = frame.coef_names();
    let ls = solve_least_squares(&frame.x, &frame.y).map_err(|e| e.with_names(&names))?;
    let q = spec.q;
    let n = frame.n();
    let sol = solve_quantile(&frame.x, &frame.y, q)?;

    let mut warnings = Vec::new();
    let mut h = hall_sheather_bandwidth(q, n);
    let h_max = 0.999 * q.min(1.0 - q);
    if h > h_max {
        warnings.push(format!("qreg: bandwidth {h:.4} shrunk to {h_max:.4} to stay inside (0, 1)"));
        h = h_max;
    }
    let hi = solve_quantile(&frame.x, &frame.y, q + h)?;
    let lo = solve_quantile(&frame.x, &frame.y, q - h)?;
    let xbar = DVector::from_fn(frame.x.ncols(), |j, _| frame.x.column(j).mean());
    let mut sparsity = xbar.dot(&(&hi.beta - &lo.beta)) / (2.0 * h);
    if sparsity < 0.0 {
        warnings.push("qreg: negative sparsity estimate replaced by its absolute value".into());
        sparsity = sparsity.abs();
    }
    let vcov = &ls.xtx_inv * (q * (1.0 - q) * sparsity * sparsity);

    // loss of the intercept-only model
    let ones = DMatrix::from_element(n, 1, 1.0);
    let raw = solve_quantile(&ones, &frame.y, q)?;

    let df = n - frame.k() - 1;
    let mut fit = FitResult::new(EstimatorKind::Qreg, frame, sol.beta, vcov, n, Some(df));
    fit.set("q", q);
    fit.set("sum_dev", 2.0 * sol.loss);
    fit.set("raw_sum_dev", 2.0 * raw.loss);
    fit.set("raw_quantile", raw.beta[0]);
    fit.set("pseudo_r2", if raw.loss > 0.0 { 1.0 - sol.loss / raw.loss } else { 0.0 });
    fit.set("sparsity", sparsity);
    fit.set("bandwidth", h);
    fit.warnings = warnings;
    Ok(fit)
}
