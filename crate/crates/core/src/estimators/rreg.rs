//! Robust regression in the style of Stata's `rreg`.
//!
//! 1. OLS on the full frame; observations with Cook's distance above the
//!    cutoff are dropped.
//! 2. IRLS with Huber weights until the largest weight change falls below
//!    the tolerance, then IRLS with Tukey biweights the same way. The scale
//!    at every step is MAD / 0.6745 of the current residuals.
//! 3. The covariance comes from Street, Carroll & Ruppert pseudovalues:
//!    `V = s^2 * sum(psi^2) / ((n - p) * mean(psi')^2) * (X'X)^-1`
//!    with the biweight psi at the final fit.

use nalgebra::{DMatrix, DVector};

use crate::data::ModelFrame;
use crate::error::{Error, Result};
use crate::numerics::{f_sf, median, solve_least_squares, solve_weighted_least_squares};

use super::{residuals, EstimatorKind, EstimatorSpec, FitResult};

const MAD_TO_SIGMA: f64 = 0.6745;

fn robust_scale(resid: &DVector<f64>) -> f64 {
    let med = median(resid.as_slice());
    let abs_dev: Vec<f64> = resid.iter().map(|r| (r - med).abs()).collect();
    median(&abs_dev) / MAD_TO_SIGMA
}

/// `|r| / (c s)`, treating `0 / 0` as 0 and `c = inf` as 0.
fn scaled_abs(r: f64, c: f64, s: f64) -> f64 {
    if r == 0.0 || c.is_infinite() {
        0.0
    } else {
        r.abs() / (c * s)
    }
}

fn huber_weight(r: f64, c: f64, s: f64) -> f64 {
    let a = scaled_abs(r, c, s);
    if a <= 1.0 {
        1.0
    } else {
        1.0 / a
    }
}

fn biweight_weight(r: f64, c: f64, s: f64) -> f64 {
    let a = scaled_abs(r, c, s);
    if a < 1.0 {
        (1.0 - a * a).powi(2)
    } else {
        0.0
    }
}

/// Cook's distance from an OLS fit.
fn cooks_distance(x: &DMatrix<f64>, resid: &DVector<f64>, xtx_inv: &DMatrix<f64>) -> Vec<f64> {
    let (n, p) = x.shape();
    let s2 = resid.norm_squared() / (n - p) as f64;
    (0..n)
        .map(|i| {
            let xi = x.row(i);
            let h = (xi * xtx_inv * xi.transpose())[(0, 0)];
            let r = resid[i];
            if r == 0.0 || s2 == 0.0 {
                0.0
            } else if h >= 1.0 {
                f64::INFINITY
            } else {
                r * r * h / (p as f64 * s2 * (1.0 - h).powi(2))
            }
        })
        .collect()
}

struct IrlsStage {
    iterations: usize,
    converged: bool,
}

fn irls(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &mut DVector<f64>,
    weights: &mut Vec<f64>,
    spec: &EstimatorSpec,
    weight_fn: impl Fn(f64, f64) -> f64,
) -> Result<IrlsStage> {
    for it in 1..=spec.irls_max_iter {
        let resid = residuals(x, y, beta);
        let s = robust_scale(&resid);
        let new_w: Vec<f64> = resid.iter().map(|&r| weight_fn(r, s)).collect();
        if new_w.iter().all(|&w| w == 0.0) {
            return Err(Error::Degenerate("all robust weights are zero".into()));
        }
        let change = new_w
            .iter()
            .zip(weights.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        *weights = new_w;
        *beta = solve_weighted_least_squares(x, y, weights)?.beta;
        if change < spec.irls_tol {
            return Ok(IrlsStage {
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(IrlsStage {
        iterations: spec.irls_max_iter,
        converged: false,
    })
}

/// Robust M-estimation: Cook's distance screen, Huber then biweight IRLS.
pub fn fit_rreg(frame: &ModelFrame, spec: &EstimatorSpec) -> Result<FitResult> {
    spec.validate()?;
    frame.require_estimable()?;
    let names = frame.coef_names();
    let p = frame.x.ncols();

    let ols = solve_least_squares(&frame.x, &frame.y).map_err(|e| e.with_names(&names))?;
    let resid = residuals(&frame.x, &frame.y, &ols.beta);
    let cook = cooks_distance(&frame.x, &resid, &ols.xtx_inv);
    let keep: Vec<usize> = (0..frame.n()).filter(|&i| cook[i] <= spec.cook_cutoff).collect();
    let dropped_rows: Vec<usize> = (0..frame.n())
        .filter(|&i| cook[i] > spec.cook_cutoff)
        .map(|i| frame.row_origin[i])
        .collect();
    let kept = frame.subset(&keep);
    if kept.n() <= p {
        return Err(Error::Degenerate(format!(
            "only {} observations survive the Cook's distance screen",
            kept.n()
        )));
    }
    let (x, y) = (&kept.x, &kept.y);
    let n = kept.n();

    let mut beta = solve_least_squares(x, y).map_err(|e| e.with_names(&names))?.beta;
    let mut weights = vec![1.0; n];
    let huber = irls(x, y, &mut beta, &mut weights, spec, |r, s| {
        huber_weight(r, spec.huber_c, s)
    })?;
    let biweight = irls(x, y, &mut beta, &mut weights, spec, |r, s| {
        biweight_weight(r, spec.biweight_c, s)
    })?;

    // pseudovalue covariance
    let resid = residuals(x, y, &beta);
    let s = robust_scale(&resid);
    let c = spec.biweight_c;
    let mut sum_psi2 = 0.0;
    let mut sum_dpsi = 0.0;
    for &r in resid.iter() {
        let a = scaled_abs(r, c, s);
        if a < 1.0 {
            // s * psi(r / s), kept in residual units so c = inf gives psi = r
            let psi_scaled = r * (1.0 - a * a).powi(2);
            sum_psi2 += psi_scaled * psi_scaled;
            sum_dpsi += (1.0 - a * a) * (1.0 - 5.0 * a * a);
        }
    }
    let mean_dpsi = sum_dpsi / n as f64;
    if mean_dpsi <= 0.0 {
        return Err(Error::Degenerate("non-positive mean psi' in robust covariance".into()));
    }
    let df = n - p;
    let xtx_inv = solve_least_squares(x, y).map_err(|e| e.with_names(&names))?.xtx_inv;
    let vcov = xtx_inv * (sum_psi2 / (df as f64 * mean_dpsi * mean_dpsi));

    let mut fit = FitResult::new(EstimatorKind::Rreg, frame, beta, vcov, n, Some(df));
    fit.dropped_rows = dropped_rows;
    fit.set("n_dropped", fit.dropped_rows.len() as f64);
    fit.set("huber_iterations", huber.iterations as f64);
    fit.set("biweight_iterations", biweight.iterations as f64);
    fit.set("scale", s);
    fit.set("min_weight", weights.iter().copied().fold(f64::INFINITY, f64::min));
    let k = frame.k();
    if let Some(w) = fit.slope_wald() {
        let f = w / k as f64;
        fit.set("F", f);
        fit.set("F_df1", k as f64);
        fit.set("F_df2", df as f64);
        fit.set("p_F", f_sf(f, k as f64, df as f64)?);
    }
    if !huber.converged || !biweight.converged {
        fit.converged = false;
        fit.warnings.push(format!(
            "rreg: IRLS did not converge within {} iterations",
            spec.irls_max_iter
        ));
    }
    fit.weights = Some(weights);
    Ok(fit)
}
