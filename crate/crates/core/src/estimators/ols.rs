use crate::data::ModelFrame;
use crate::error::Result;
use crate::numerics::{f_sf, mean, solve_least_squares};

use super::{residuals, EstimatorKind, FitResult};

/// Ordinary least squares with the classical `s^2 (X'X)^-1` covariance.
pub fn fit_ols(frame: &ModelFrame) -> Result<FitResult> {
    frame.require_estimable()?;
    let names = frame.coef_names();
    let ls = solve_least_squares(&frame.x, &frame.y).map_err(|e| e.with_names(&names))?;

    let n = frame.n();
    let k = frame.k();
    let df = n - k - 1;
    let resid = residuals(&frame.x, &frame.y, &ls.beta);
    let rss = resid.norm_squared();
    let s2 = rss / df as f64;
    let vcov = &ls.xtx_inv * s2;

    let ybar = mean(frame.y.as_slice());
    let tss: f64 = frame.y.iter().map(|v| (v - ybar).powi(2)).sum();
    let ess = (tss - rss).max(0.0);
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let adj_r2 = 1.0 - (1.0 - r2) * (n - 1) as f64 / df as f64;
    let f = if rss > 0.0 {
        (ess / k as f64) / s2
    } else {
        f64::INFINITY
    };

    let mut fit = FitResult::new(EstimatorKind::Ols, frame, ls.beta, vcov, n, Some(df));
    fit.set("rss", rss);
    fit.set("mss", ess);
    fit.set("tss", tss);
    fit.set("r2", r2);
    fit.set("adj_r2", adj_r2);
    fit.set("rmse", s2.sqrt());
    fit.set("F", f);
    fit.set("F_df1", k as f64);
    fit.set("F_df2", df as f64);
    fit.set("p_F", f_sf(f, k as f64, df as f64)?);
    Ok(fit)
}
