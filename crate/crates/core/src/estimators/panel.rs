//! Fixed-effects (within) and random-effects (GLS) panel regressions.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, ModelFrame};
use crate::error::{Error, Result};
use crate::numerics::{chi2_sf, f_sf, mean, sample_variance, solve_least_squares, squared_correlation};

use super::{residuals, EstimatorKind, FitResult};

/// Dense group ids for the rows of a frame.
struct Groups {
    id: Vec<usize>,
    sizes: Vec<usize>,
}

impl Groups {
    fn count(&self) -> usize {
        self.sizes.len()
    }

    fn means(&self, values: impl Iterator<Item = f64>) -> Vec<f64> {
        let mut sums = vec![0.0; self.count()];
        for (v, &g) in values.zip(&self.id) {
            sums[g] += v;
        }
        sums.iter().zip(&self.sizes).map(|(s, &t)| s / t as f64).collect()
    }

    fn set_diagnostics(&self, fit: &mut FitResult) {
        fit.set("n_groups", self.count() as f64);
        fit.set("T_min", *self.sizes.iter().min().unwrap_or(&0) as f64);
        fit.set("T_max", *self.sizes.iter().max().unwrap_or(&0) as f64);
        fit.set("T_avg", self.id.len() as f64 / self.count() as f64);
    }
}

fn frame_groups(frame: &ModelFrame, ds: &Dataset) -> Result<Groups> {
    let panel = ds
        .panel()
        .ok_or_else(|| Error::Panel("dataset has no panel index; set group and time variables".into()))?;
    let mut dense: HashMap<usize, usize> = HashMap::new();
    let mut sizes = Vec::new();
    let mut id = Vec::with_capacity(frame.n());
    for &row in &frame.row_origin {
        let label = *panel
            .group_of_row
            .get(row)
            .ok_or_else(|| Error::Panel(format!("frame row {row} is outside the dataset")))?;
        let g = *dense.entry(label).or_insert_with(|| {
            sizes.push(0);
            sizes.len() - 1
        });
        sizes[g] += 1;
        id.push(g);
    }
    Ok(Groups { id, sizes })
}

/// Group means of `y` and of every regressor column (intercept excluded).
struct GroupMeans {
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
}

fn group_means(frame: &ModelFrame, groups: &Groups) -> GroupMeans {
    GroupMeans {
        y: groups.means(frame.y.iter().copied()),
        x: (0..frame.k())
            .map(|j| groups.means(frame.x.column(j).iter().copied()))
            .collect(),
    }
}

struct WithinFit {
    beta: DVector<f64>,
    xtx_inv: DMatrix<f64>,
    rss: f64,
    df: usize,
}

/// OLS on group-demeaned data with grand means added back, so the
/// intercept equals `ybar - xbar' b`.
fn within_fit(frame: &ModelFrame, groups: &Groups, means: &GroupMeans) -> Result<WithinFit> {
    let n = frame.n();
    let k = frame.k();
    let g = groups.count();
    let names = frame.coef_names();

    for j in 0..k {
        let col = frame.x.column(j);
        let scale: f64 = col.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
        let within: f64 = col
            .iter()
            .zip(&groups.id)
            .map(|(v, &gid)| (v - means.x[j][gid]).powi(2))
            .sum();
        if within <= 1e-20 * scale {
            return Err(Error::Collinear {
                column: j,
                name: format!("{} (no within-group variation)", names[j]),
            });
        }
    }
    if n <= k + g {
        return Err(Error::InsufficientObservations(format!(
            "{n} observations for {k} regressors and {g} groups"
        )));
    }

    let ybar = mean(frame.y.as_slice());
    let xbar: Vec<f64> = (0..k).map(|j| frame.x.column(j).mean()).collect();
    let y_t = DVector::from_fn(n, |i, _| frame.y[i] - means.y[groups.id[i]] + ybar);
    let x_t = DMatrix::from_fn(n, k + 1, |i, j| {
        if j == k {
            1.0
        } else {
            frame.x[(i, j)] - means.x[j][groups.id[i]] + xbar[j]
        }
    });
    let ls = solve_least_squares(&x_t, &y_t).map_err(|e| e.with_names(&names))?;
    let rss = residuals(&x_t, &y_t, &ls.beta).norm_squared();
    Ok(WithinFit {
        beta: ls.beta,
        xtx_inv: ls.xtx_inv,
        rss,
        df: n - k - g,
    })
}

/// Within, between and overall R-squared as squared correlations.
fn r2_triple(frame: &ModelFrame, groups: &Groups, means: &GroupMeans, beta: &DVector<f64>) -> (f64, f64, f64) {
    let k = frame.k();
    let slopes = beta.rows(0, k);
    let xb: Vec<f64> = (0..frame.n()).map(|i| (frame.x.row(i).columns(0, k) * slopes)[(0, 0)]).collect();
    let xb_bar = groups.means(xb.iter().copied());
    let y_dm: Vec<f64> = (0..frame.n()).map(|i| frame.y[i] - means.y[groups.id[i]]).collect();
    let xb_dm: Vec<f64> = (0..frame.n()).map(|i| xb[i] - xb_bar[groups.id[i]]).collect();
    (
        squared_correlation(&y_dm, &xb_dm),
        squared_correlation(&means.y, &xb_bar),
        squared_correlation(frame.y.as_slice(), &xb),
    )
}

/// Fixed-effects (within) regression.
///
/// The reported `_cons` is the grand-mean intercept `ybar - xbar' b`;
/// `s^2 = RSS / (n - k - G)`.
pub fn fit_fe(frame: &ModelFrame, ds: &Dataset) -> Result<FitResult> {
    frame.require_estimable()?;
    let groups = frame_groups(frame, ds)?;
    let means = group_means(frame, &groups);
    let wf = within_fit(frame, &groups, &means)?;
    let n = frame.n();
    let k = frame.k();
    let g = groups.count();
    let s2 = wf.rss / wf.df as f64;
    let vcov = &wf.xtx_inv * s2;

    // group effects u_g = ybar_g - xbar_g' b - cons
    let cons = wf.beta[k];
    let u: Vec<f64> = (0..g)
        .map(|gid| means.y[gid] - (0..k).map(|j| means.x[j][gid] * wf.beta[j]).sum::<f64>() - cons)
        .collect();
    let sigma_u = sample_variance(&u).sqrt();
    let sigma_e = s2.sqrt();
    let (r2_w, r2_b, r2_o) = r2_triple(frame, &groups, &means, &wf.beta);

    let mut fit = FitResult::new(EstimatorKind::Fe, frame, wf.beta.clone(), vcov, n, Some(wf.df));
    groups.set_diagnostics(&mut fit);
    fit.set("rss", wf.rss);
    fit.set("sigma_u", sigma_u);
    fit.set("sigma_e", sigma_e);
    fit.set("rho", sigma_u.powi(2) / (sigma_u.powi(2) + s2));
    fit.set("r2_within", r2_w);
    fit.set("r2_between", r2_b);
    fit.set("r2_overall", r2_o);

    let u_obs: Vec<f64> = groups.id.iter().map(|&gid| u[gid]).collect();
    let xb: Vec<f64> = (0..n)
        .map(|i| (0..k).map(|j| frame.x[(i, j)] * wf.beta[j]).sum())
        .collect();
    fit.set("corr_u_xb", signed_correlation(&u_obs, &xb));

    if let Some(w) = fit.slope_wald() {
        let f = w / k as f64;
        fit.set("F", f);
        fit.set("F_df1", k as f64);
        fit.set("F_df2", wf.df as f64);
        fit.set("p_F", f_sf(f, k as f64, wf.df as f64)?);
    }
    if g > 1 {
        if let Ok(pooled) = solve_least_squares(&frame.x, &frame.y) {
            let rss_pooled = residuals(&frame.x, &frame.y, &pooled.beta).norm_squared();
            let df1 = (g - 1) as f64;
            let f_u = ((rss_pooled - wf.rss) / df1) / s2;
            fit.set("F_u", f_u);
            fit.set("F_u_df1", df1);
            fit.set("F_u_df2", wf.df as f64);
            fit.set("p_F_u", f_sf(f_u.max(0.0), df1, wf.df as f64)?);
        }
    }
    Ok(fit)
}

fn signed_correlation(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Random-effects variance components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceComponents {
    pub sigma_u2: f64,
    pub sigma_e2: f64,
}

/// Swamy-Arora components: `sigma_e^2` from the within residuals and
/// `sigma_u^2 = RSS_between / (G - k - 1) - sigma_e^2 / T_bar`, floored at
/// zero, with `T_bar` the harmonic mean group size.
pub fn swamy_arora(frame: &ModelFrame, ds: &Dataset) -> Result<VarianceComponents> {
    let groups = frame_groups(frame, ds)?;
    let means = group_means(frame, &groups);
    let wf = within_fit(frame, &groups, &means)?;
    let sigma_e2 = wf.rss / wf.df as f64;

    let g = groups.count();
    let k = frame.k();
    if g <= k + 1 {
        return Err(Error::InsufficientObservations(format!(
            "between regression needs more than {} groups, found {g}",
            k + 1
        )));
    }
    let yb = DVector::from_vec(means.y.clone());
    let xb = DMatrix::from_fn(g, k + 1, |i, j| if j == k { 1.0 } else { means.x[j][i] });
    let between = solve_least_squares(&xb, &yb).map_err(|e| e.with_names(&frame.coef_names()))?;
    let rss_b = residuals(&xb, &yb, &between.beta).norm_squared();
    let t_bar = g as f64 / groups.sizes.iter().map(|&t| 1.0 / t as f64).sum::<f64>();
    let sigma_u2 = (rss_b / (g - k - 1) as f64 - sigma_e2 / t_bar).max(0.0);
    Ok(VarianceComponents { sigma_u2, sigma_e2 })
}

/// Random-effects GLS regression with Swamy-Arora variance components.
pub fn fit_re(frame: &ModelFrame, ds: &Dataset) -> Result<FitResult> {
    frame.require_estimable()?;
    let comps = swamy_arora(frame, ds)?;
    fit_re_with_components(frame, ds, comps)
}

/// GLS on quasi-demeaned data for given variance components.
///
/// Group `g` is transformed with `theta_g = 1 - sqrt(s_e^2 / (T_g s_u^2 + s_e^2))`:
/// `y - theta_g ybar_g` on `x - theta_g xbar_g` and a constant `1 - theta_g`.
/// The covariance is `s^2 (X*'X*)^-1` with `s^2` the transformed residual
/// variance over `n - k - 1`. When every `theta_g` is 1 the transformation
/// is the within transformation and the constant is recovered through
/// grand means as in [`fit_fe`].
pub fn fit_re_with_components(frame: &ModelFrame, ds: &Dataset, comps: VarianceComponents) -> Result<FitResult> {
    frame.require_estimable()?;
    if comps.sigma_u2 < 0.0 || comps.sigma_e2 < 0.0 {
        return Err(Error::Domain("variance components must be non-negative".into()));
    }
    let groups = frame_groups(frame, ds)?;
    let means = group_means(frame, &groups);
    let n = frame.n();
    let k = frame.k();
    let names = frame.coef_names();

    let theta: Vec<f64> = groups
        .sizes
        .iter()
        .map(|&t| {
            let denom = t as f64 * comps.sigma_u2 + comps.sigma_e2;
            if denom == 0.0 {
                0.0
            } else {
                1.0 - (comps.sigma_e2 / denom).sqrt()
            }
        })
        .collect();
    let within_limit = theta.iter().all(|&t| t >= 1.0 - 1e-12);

    let ybar = mean(frame.y.as_slice());
    let xbar: Vec<f64> = (0..k).map(|j| frame.x.column(j).mean()).collect();
    let (y_t, x_t) = if within_limit {
        (
            DVector::from_fn(n, |i, _| frame.y[i] - means.y[groups.id[i]] + ybar),
            DMatrix::from_fn(n, k + 1, |i, j| {
                if j == k {
                    1.0
                } else {
                    frame.x[(i, j)] - means.x[j][groups.id[i]] + xbar[j]
                }
            }),
        )
    } else {
        (
            DVector::from_fn(n, |i, _| frame.y[i] - theta[groups.id[i]] * means.y[groups.id[i]]),
            DMatrix::from_fn(n, k + 1, |i, j| {
                let th = theta[groups.id[i]];
                if j == k {
                    1.0 - th
                } else {
                    frame.x[(i, j)] - th * means.x[j][groups.id[i]]
                }
            }),
        )
    };
    let ls = solve_least_squares(&x_t, &y_t).map_err(|e| e.with_names(&names))?;
    let rss = residuals(&x_t, &y_t, &ls.beta).norm_squared();
    let s2 = rss / (n - k - 1) as f64;
    let vcov = &ls.xtx_inv * s2;
    let (r2_w, r2_b, r2_o) = r2_triple(frame, &groups, &means, &ls.beta);

    let mut fit = FitResult::new(EstimatorKind::Re, frame, ls.beta, vcov, n, None);
    groups.set_diagnostics(&mut fit);
    fit.set("sigma_u", comps.sigma_u2.sqrt());
    fit.set("sigma_e", comps.sigma_e2.sqrt());
    let total = comps.sigma_u2 + comps.sigma_e2;
    fit.set("rho", if total > 0.0 { comps.sigma_u2 / total } else { 0.0 });
    let th_min = theta.iter().copied().fold(f64::INFINITY, f64::min);
    let th_max = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if th_max - th_min <= 1e-12 {
        fit.set("theta", th_min);
    } else {
        fit.set("theta_min", th_min);
        fit.set("theta_max", th_max);
    }
    fit.set("r2_within", r2_w);
    fit.set("r2_between", r2_b);
    fit.set("r2_overall", r2_o);
    if let Some(w) = fit.slope_wald() {
        fit.set("wald_chi2", w);
        fit.set("wald_df", k as f64);
        fit.set("p_wald", chi2_sf(w.max(0.0), k)?);
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_frame;
    use crate::estimators::fit_ols;

    fn panel(group: Vec<f64>, time: Vec<f64>, y: Vec<f64>, x: Vec<f64>) -> Dataset {
        Dataset::from_numeric(vec![("g", group), ("t", time), ("y", y), ("x", x)])
            .unwrap()
            .set_panel("g", "t")
            .unwrap()
    }

    fn xframe(ds: &Dataset) -> ModelFrame {
        build_frame(ds, "y", &["x".to_string()], None).unwrap()
    }

    #[test]
    fn fe_matches_hand_demeaned_ols() {
        // 2 groups x 3 periods
        let ds = panel(
            vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0],
            vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0],
            vec![3.0, 5.0, 4.0, 10.0, 13.0, 12.0],
            vec![1.0, 3.0, 2.0, 4.0, 7.0, 5.0],
        );
        let fit = fit_fe(&xframe(&ds), &ds).unwrap();
        // group means: g1 x=2 y=4, g2 x=16/3 y=35/3
        let xd = [-1.0, 1.0, 0.0, 4.0 - 16.0 / 3.0, 7.0 - 16.0 / 3.0, 5.0 - 16.0 / 3.0];
        let yd = [-1.0, 1.0, 0.0, 10.0 - 35.0 / 3.0, 13.0 - 35.0 / 3.0, 12.0 - 35.0 / 3.0];
        let sxy: f64 = xd.iter().zip(&yd).map(|(a, b)| a * b).sum();
        let sxx: f64 = xd.iter().map(|a| a * a).sum();
        assert!((fit.beta[0] - sxy / sxx).abs() < 1e-12);
        let cons = 47.0 / 6.0 - sxy / sxx * 22.0 / 6.0;
        assert!((fit.beta[1] - cons).abs() < 1e-12);
        assert_eq!(fit.df_resid, Some(6 - 1 - 2));
    }

    #[test]
    fn one_observation_per_group_has_no_within_variation() {
        let ds = panel(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![1.0; 4],
            vec![1.0, 2.0, 4.0, 3.0],
            vec![0.5, 1.0, 2.5, 2.0],
        );
        assert!(matches!(fit_fe(&xframe(&ds), &ds), Err(Error::Collinear { .. })));
    }

    #[test]
    fn missing_panel_index_is_an_error() {
        let ds = Dataset::from_numeric(vec![("y", vec![1.0, 2.0, 3.0, 5.0]), ("x", vec![1.0, 2.0, 4.0, 3.0])]).unwrap();
        assert!(matches!(fit_fe(&xframe(&ds), &ds), Err(Error::Panel(_))));
    }

    #[test]
    fn zero_between_variance_gives_pooled_ols() {
        // group means of y are exactly what x predicts: between residuals vanish
        let g = vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 3.0, 3.0, 3.0, 4.0, 4.0, 4.0];
        let t = vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        let x = vec![1.0, 2.0, 3.0, 2.0, 4.0, 3.0, 5.0, 1.0, 3.0, 4.0, 6.0, 5.0];
        let noise = [0.3, -0.5, 0.2, -0.1, 0.4, -0.3, 0.6, -0.2, -0.4, 0.1, -0.6, 0.5];
        let y: Vec<f64> = x.iter().zip(noise).map(|(v, e)| 1.0 + 2.0 * v + e).collect();
        let ds = panel(g, t, y, x);
        let frame = xframe(&ds);
        let comps = swamy_arora(&frame, &ds).unwrap();
        assert_eq!(comps.sigma_u2, 0.0);
        let re = fit_re(&frame, &ds).unwrap();
        let ols = fit_ols(&frame).unwrap();
        assert!((&re.beta - &ols.beta).amax() < 1e-10);
        assert_eq!(re.diag("theta"), Some(0.0));
        assert_eq!(re.df_resid, None);
    }

    #[test]
    fn re_matches_explicit_gls() {
        // 2 groups, unbalanced, components supplied directly
        let g = vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0];
        let t = vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 4.0];
        let x = vec![1.0, 3.0, 2.0, 4.0, 7.0, 5.0, 6.0];
        let y = vec![3.0, 5.0, 4.0, 10.0, 13.0, 12.0, 12.5];
        let ds = panel(g.clone(), t, y.clone(), x.clone());
        let frame = xframe(&ds);
        let comps = VarianceComponents {
            sigma_u2: 2.5,
            sigma_e2: 0.8,
        };
        let fit = fit_re_with_components(&frame, &ds, comps).unwrap();

        // Omega = s_e^2 I + s_u^2 (same-group indicator)
        let n = y.len();
        let omega = DMatrix::from_fn(n, n, |i, j| {
            let same = if g[i] == g[j] { comps.sigma_u2 } else { 0.0 };
            same + if i == j { comps.sigma_e2 } else { 0.0 }
        });
        let oi = omega.try_inverse().unwrap();
        let xm = DMatrix::from_fn(n, 2, |i, j| if j == 0 { x[i] } else { 1.0 });
        let yv = DVector::from_vec(y);
        let lhs = xm.transpose() * &oi * &xm;
        let rhs = xm.transpose() * &oi * &yv;
        let gls = lhs.try_inverse().unwrap() * rhs;
        assert!((&fit.beta - &gls).amax() < 1e-8, "{} vs {}", fit.beta, gls);
    }

    #[test]
    fn re_theta_one_limit_is_fe() {
        let ds = panel(
            vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 3.0, 3.0, 3.0],
            vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 2.0, 3.0],
            vec![3.0, 5.0, 4.0, 10.0, 13.0, 12.0, 7.0, 6.0, 9.0],
            vec![1.0, 3.0, 2.0, 4.0, 7.0, 5.0, 2.0, 1.0, 4.0],
        );
        let frame = xframe(&ds);
        let fe = fit_fe(&frame, &ds).unwrap();
        let re = fit_re_with_components(
            &frame,
            &ds,
            VarianceComponents {
                sigma_u2: 1.0,
                sigma_e2: 0.0,
            },
        )
        .unwrap();
        assert!((&re.beta - &fe.beta).amax() < 1e-8);
    }

    #[test]
    fn fe_invariant_to_group_shifts_of_y() {
        let g = vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 3.0, 3.0, 3.0];
        let t = vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        let x = vec![1.0, 3.0, 2.0, 4.0, 7.0, 5.0, 2.0, 1.0, 4.0];
        let y = vec![3.0, 5.0, 4.0, 10.0, 13.0, 12.0, 7.0, 6.0, 9.0];
        let shift = [100.0, -40.0, 7.5];
        let y2: Vec<f64> = y.iter().zip(&g).map(|(v, gi)| v + shift[*gi as usize - 1]).collect();
        let a = panel(g.clone(), t.clone(), y, x.clone());
        let b = panel(g, t, y2, x);
        let fa = fit_fe(&xframe(&a), &a).unwrap();
        let fb = fit_fe(&xframe(&b), &b).unwrap();
        assert!((fa.beta[0] - fb.beta[0]).abs() < 1e-10);
        assert!((fa.se[0] - fb.se[0]).abs() < 1e-10);
    }
}
