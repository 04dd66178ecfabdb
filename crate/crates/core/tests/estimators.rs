//! Estimators on the bundled datasets against published reference output.

mod common;

use common::*;
use paramcmp::estimators::{fit_fe, fit_ols, fit_qreg, fit_qreg_bootstrap, fit_re, fit_rreg, swamy_arora};
use paramcmp::{EstimatorKind, EstimatorSpec, ModelFrame};

#[test]
fn ols_crime_table() {
    let ds = crime();
    let fit = fit_ols(&frame(&ds, "crime", &["pctmetro", "pcths", "poverty"])).unwrap();
    let beta = [11.92801, 26.86559, 76.86437, -3334.774];
    let se = [1.75924, 10.31791, 12.60933, 946.0239];
    for i in 0..4 {
        assert_rel(fit.beta[i], beta[i], 1e-5);
        assert_rel(fit.se[i], se[i], 1e-5);
    }
    assert_eq!(fit.n_obs, 51);
    assert_abs(fit.diag("r2").unwrap(), 0.6428, 1e-4);
    assert_abs(fit.diag("adj_r2").unwrap(), 0.6200, 1e-4);
    assert_abs(fit.diag("F").unwrap(), 28.20, 0.01);
    assert_abs(fit.diag("rmse").unwrap(), 271.9, 0.05);
}

#[test]
fn fe_grunfeld_table() {
    let ds = grunfeld();
    let fit = fit_fe(&frame(&ds, "invest", &["mvalue", "kstock"]), &ds).unwrap();
    let beta = [0.1101238, 0.3100653, -58.74393];
    let se = [0.0118567, 0.0173545, 12.45369];
    for i in 0..3 {
        assert_rel(fit.beta[i], beta[i], 1e-5);
        assert_rel(fit.se[i], se[i], 1e-5);
    }
    assert_eq!(fit.df_resid, Some(188));
    assert_abs(fit.diag("sigma_u").unwrap(), 85.732501, 1e-5);
    assert_abs(fit.diag("sigma_e").unwrap(), 52.767964, 1e-5);
    assert_abs(fit.diag("rho").unwrap(), 0.72525012, 1e-7);
    assert_abs(fit.diag("F").unwrap(), 309.01, 0.01);
    assert_abs(fit.diag("F_u").unwrap(), 49.18, 0.01);
    assert_abs(fit.diag("r2_within").unwrap(), 0.7668, 1e-4);
    assert_abs(fit.diag("r2_between").unwrap(), 0.8194, 1e-4);
    assert_abs(fit.diag("r2_overall").unwrap(), 0.8060, 1e-4);
    assert_abs(fit.diag("corr_u_xb").unwrap(), -0.1517, 1e-4);
    assert_eq!(fit.diag("n_groups"), Some(10.0));
    assert_eq!((fit.diag("T_min"), fit.diag("T_max")), (Some(20.0), Some(20.0)));
}

#[test]
fn re_grunfeld_table() {
    let ds = grunfeld();
    let fit = fit_re(&frame(&ds, "invest", &["mvalue", "kstock"]), &ds).unwrap();
    let beta = [0.1097811, 0.308113, -57.83441];
    let se = [0.0104927, 0.0171805, 28.89893];
    for i in 0..3 {
        assert_rel(fit.beta[i], beta[i], 1e-5);
        assert_rel(fit.se[i], se[i], 1e-5);
    }
    assert_eq!(fit.df_resid, None);
    assert_abs(fit.diag("sigma_u").unwrap(), 84.20095, 1e-4);
    assert_abs(fit.diag("rho").unwrap(), 0.71800838, 1e-7);
    assert_abs(fit.diag("theta").unwrap(), 0.86122, 1e-5);
    assert_abs(fit.diag("wald_chi2").unwrap(), 657.67, 0.01);
    assert_abs(fit.diag("r2_overall").unwrap(), 0.8061, 1e-4);
}

#[test]
fn swamy_arora_components_on_grunfeld() {
    let ds = grunfeld();
    let c = swamy_arora(&frame(&ds, "invest", &["mvalue", "kstock"]), &ds).unwrap();
    assert_abs(c.sigma_u2.sqrt(), 84.20095, 1e-4);
    assert_abs(c.sigma_e2.sqrt(), 52.767964, 1e-5);
}

#[test]
fn median_regression_crime() {
    let ds = crime();
    let spec = EstimatorSpec::new(EstimatorKind::Qreg);
    let fit = fit_qreg(&frame(&ds, "crime", &["pctmetro", "pcths"]), &spec).unwrap();
    let beta = [9.532475, -19.27213, 1413.812];
    let se = [2.071695, 8.134439, 637.6934];
    for i in 0..3 {
        assert_rel(fit.beta[i], beta[i], 1e-6);
        assert_rel(fit.se[i], se[i], 1e-5);
    }
    assert_abs(fit.diag("pseudo_r2").unwrap(), 0.2979, 1e-4);
}

#[test]
fn engel_quantiles() {
    let ds = engel();
    let f = frame(&ds, "foodexp", &["income"]);
    let lo = fit_qreg(&f, &EstimatorSpec::new(EstimatorKind::Qreg).with_q(0.25)).unwrap();
    let hi = fit_qreg(&f, &EstimatorSpec::new(EstimatorKind::Qreg).with_q(0.75)).unwrap();
    assert_rel(lo.beta[0], 0.4741032, 1e-6);
    assert_rel(lo.beta[1], 0.0954835, 1e-5);
    assert_rel(hi.beta[0], 0.6440143, 1e-6);
    assert_rel(hi.beta[1], 0.0623965, 1e-5);
    assert_abs(lo.diag("pseudo_r2").unwrap(), 0.554, 1e-3);
    assert_abs(hi.diag("pseudo_r2").unwrap(), 0.697, 1e-3);
}

#[test]
fn engel_bootstrap_standard_errors_are_plausible() {
    let ds = engel();
    let f = frame(&ds, "foodexp", &["income"]);
    for (q, reference) in [(0.25, 0.0383497), (0.75, 0.0319918)] {
        let spec = EstimatorSpec::new(EstimatorKind::QregBootstrap).with_q(q).with_reps(100).with_seed(20);
        let fit = fit_qreg_bootstrap(&f, &spec).unwrap();
        assert!(rel_err(fit.se[0], reference) < 0.5, "q={q}: se {}", fit.se[0]);
        assert_eq!(fit.diag("bootstrap_failures"), Some(0.0));
    }
}

#[test]
fn robust_regression_crime() {
    let ds = crime();
    let fit = fit_rreg(
        &frame(&ds, "crime", &["pctmetro", "pcths", "poverty"]),
        &EstimatorSpec::new(EstimatorKind::Rreg),
    )
    .unwrap();
    assert_eq!(fit.n_obs, 50);
    // the screened observation is the District of Columbia
    assert_eq!(fit.dropped_rows, vec![50]);
    let beta = [9.547002, 4.582318, 40.77088, -1000.856];
    for i in 0..4 {
        assert_rel(fit.beta[i], beta[i], 1e-4);
    }
    // covariance method differs in detail from the reference implementation
    let se = [1.378778, 8.272346, 10.99935, 780.8014];
    for i in 0..4 {
        assert!(rel_err(fit.se[i], se[i]) < 0.05, "se[{i}] = {}", fit.se[i]);
    }
    assert!(fit.converged);
}

#[test]
fn robust_regression_crime_two_regressors() {
    let ds = crime();
    let fit = fit_rreg(&frame(&ds, "crime", &["pctmetro", "pcths"]), &EstimatorSpec::new(EstimatorKind::Rreg)).unwrap();
    assert_eq!(fit.n_obs, 51);
    for (i, b) in [8.623612, -18.21422, 1376.441].into_iter().enumerate() {
        assert_rel(fit.beta[i], b, 1e-4);
    }
}

#[test]
fn robust_regression_resists_contamination() {
    // y = 2 + 3x with small noise; 20% of responses shifted far upward
    let n = 60;
    let x: Vec<f64> = (0..n).map(|i| i as f64 / 6.0).collect();
    let y: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let noise = ((i * 37) % 11) as f64 / 11.0 - 0.5;
            let shift = if i % 5 == 0 { 40.0 } else { 0.0 };
            2.0 + 3.0 * v + noise + shift
        })
        .collect();
    let f = ModelFrame::from_columns("y", y, vec![("x", x)]).unwrap();
    let ols = fit_ols(&f).unwrap();
    let rreg = fit_rreg(&f, &EstimatorSpec::new(EstimatorKind::Rreg)).unwrap();
    let err = |b: &nalgebra::DVector<f64>| (b[0] - 3.0).abs() + (b[1] - 2.0).abs();
    assert!(err(&rreg.beta) < 0.1 * err(&ols.beta), "rreg {} ols {}", rreg.beta, ols.beta);
}

#[test]
fn robust_regression_on_clean_data_keeps_high_weights() {
    let x: Vec<f64> = (0..30).map(|i| i as f64).collect();
    let y: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| 1.0 + 0.5 * v + if i % 2 == 0 { 0.01 } else { -0.01 })
        .collect();
    let f = ModelFrame::from_columns("y", y, vec![("x", x)]).unwrap();
    let fit = fit_rreg(&f, &EstimatorSpec::new(EstimatorKind::Rreg)).unwrap();
    let ols = fit_ols(&f).unwrap();
    assert!(fit.weights.as_ref().unwrap().iter().all(|&w| w > 0.95));
    assert!((&fit.beta - &ols.beta).amax() < 1e-3, "{} vs {}", fit.beta, ols.beta);
}
