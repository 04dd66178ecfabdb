//! Regression estimators with a common result type.
//!
//! Each estimator takes a [`ModelFrame`] and returns a [`FitResult`] holding
//! the coefficient vector, its covariance matrix and a bag of named
//! diagnostics. Coefficient names always end with `_cons`.

mod bootstrap;
mod ols;
mod panel;
mod qreg;
mod rreg;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ModelFrame};
use crate::error::{Error, Result};
use crate::numerics::symmetrize;

pub use bootstrap::fit_qreg_bootstrap;
pub use ols::fit_ols;
pub use panel::{fit_fe, fit_re, fit_re_with_components, swamy_arora, VarianceComponents};
pub use qreg::{fit_qreg, hall_sheather_bandwidth, solve_quantile, QuantileSolution};
pub use rreg::fit_rreg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Ols,
    Rreg,
    Qreg,
    QregBootstrap,
    Fe,
    Re,
}

impl EstimatorKind {
    pub fn tag(self) -> &'static str {
        match self {
            EstimatorKind::Ols => "ols",
            EstimatorKind::Rreg => "rreg",
            EstimatorKind::Qreg => "qreg",
            EstimatorKind::QregBootstrap => "qreg_bootstrap",
            EstimatorKind::Fe => "fe",
            EstimatorKind::Re => "re",
        }
    }

    pub fn is_panel(self) -> bool {
        matches!(self, EstimatorKind::Fe | EstimatorKind::Re)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ols" => EstimatorKind::Ols,
            "rreg" => EstimatorKind::Rreg,
            "qreg" => EstimatorKind::Qreg,
            "qreg_bootstrap" => EstimatorKind::QregBootstrap,
            "fe" => EstimatorKind::Fe,
            "re" => EstimatorKind::Re,
            other => return Err(Error::Usage(format!("unknown estimator `{other}`"))),
        })
    }
}

/// Estimator choice plus its tuning options.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    /// Quantile for `qreg` / `qreg_bootstrap`.
    pub q: f64,
    /// Bootstrap replications.
    pub reps: usize,
    pub seed: u64,
    pub huber_c: f64,
    pub biweight_c: f64,
    /// Observations with Cook's distance above this are dropped before IRLS.
    pub cook_cutoff: f64,
    /// Largest absolute weight change that counts as IRLS convergence.
    pub irls_tol: f64,
    pub irls_max_iter: usize,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            q: 0.5,
            reps: 100,
            seed: 0,
            huber_c: 1.345,
            biweight_c: 4.685,
            cook_cutoff: 1.0,
            irls_tol: 0.01,
            irls_max_iter: 50,
        }
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::Domain(format!("quantile must lie in (0, 1), got {}", self.q)));
        }
        if self.reps < 2 {
            return Err(Error::Domain(format!("need at least 2 bootstrap replications, got {}", self.reps)));
        }
        for (name, v) in [
            ("huber_c", self.huber_c),
            ("biweight_c", self.biweight_c),
            ("cook_cutoff", self.cook_cutoff),
            ("irls_tol", self.irls_tol),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.irls_max_iter == 0 {
            return Err(Error::Domain("irls_max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Output of every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub estimator: EstimatorKind,
    pub depvar: String,
    /// Coefficient names, `_cons` last.
    pub names: Vec<String>,
    pub beta: DVector<f64>,
    pub vcov: DMatrix<f64>,
    pub se: DVector<f64>,
    pub n_obs: usize,
    /// Residual degrees of freedom; `None` for large-sample (z) inference.
    pub df_resid: Option<usize>,
    pub diagnostics: BTreeMap<String, f64>,
    pub converged: bool,
    pub warnings: Vec<String>,
    /// Zero-based dataset rows the estimator discarded on its own.
    pub dropped_rows: Vec<usize>,
    /// Final IRLS weights, aligned with the retained rows.
    pub weights: Option<Vec<f64>>,
}

impl FitResult {
    pub(crate) fn new(
        estimator: EstimatorKind,
        frame: &ModelFrame,
        beta: DVector<f64>,
        vcov: DMatrix<f64>,
        n_obs: usize,
        df_resid: Option<usize>,
    ) -> Self {
        let vcov = symmetrize(&vcov);
        let se = DVector::from_fn(vcov.nrows(), |i, _| vcov[(i, i)].max(0.0).sqrt());
        Self {
            estimator,
            depvar: frame.depvar.clone(),
            names: frame.coef_names(),
            beta,
            vcov,
            se,
            n_obs,
            df_resid,
            diagnostics: BTreeMap::new(),
            converged: true,
            warnings: Vec::new(),
            dropped_rows: Vec::new(),
            weights: None,
        }
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.beta[i])
    }

    pub fn stderr(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.se[i])
    }

    pub fn diag(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    pub(crate) fn set(&mut self, key: &str, value: f64) {
        self.diagnostics.insert(key.to_string(), value);
    }

    /// Wald test that every non-intercept coefficient is zero:
    /// `b' V^-1 b` over the slope block.
    pub(crate) fn slope_wald(&self) -> Option<f64> {
        let k = self.beta.len().checked_sub(1)?;
        if k == 0 {
            return None;
        }
        let b = self.beta.rows(0, k).into_owned();
        let v = self.vcov.view((0, 0), (k, k)).into_owned();
        let inv = v.try_inverse()?;
        Some((b.transpose() * inv * b)[(0, 0)])
    }
}

/// Fit `spec` on `frame`; panel estimators read group labels from `ds`.
pub fn fit(frame: &ModelFrame, ds: &Dataset, spec: &EstimatorSpec) -> Result<FitResult> {
    spec.validate()?;
    match spec.kind {
        EstimatorKind::Ols => fit_ols(frame),
        EstimatorKind::Rreg => fit_rreg(frame, spec),
        EstimatorKind::Qreg => fit_qreg(frame, spec),
        EstimatorKind::QregBootstrap => fit_qreg_bootstrap(frame, spec),
        EstimatorKind::Fe => fit_fe(frame, ds),
        EstimatorKind::Re => fit_re(frame, ds),
    }
}

/// Residuals `y - X b`.
pub(crate) fn residuals(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
    y - x * beta
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        let ok = EstimatorSpec::new(EstimatorKind::Qreg).with_q(0.25);
        assert!(ok.validate().is_ok());
        assert!(EstimatorSpec::new(EstimatorKind::Qreg).with_q(1.0).validate().is_err());
        assert!(EstimatorSpec::new(EstimatorKind::Qreg).with_q(0.0).validate().is_err());
        assert!(EstimatorSpec::new(EstimatorKind::QregBootstrap).with_reps(1).validate().is_err());
        let mut bad = EstimatorSpec::new(EstimatorKind::Rreg);
        bad.huber_c = 0.0;
        assert!(bad.validate().is_err());
        let mut inf = EstimatorSpec::new(EstimatorKind::Rreg);
        inf.huber_c = f64::INFINITY;
        assert!(inf.validate().is_ok());
    }

    #[test]
    fn kind_tags_round_trip() {
        for k in [
            EstimatorKind::Ols,
            EstimatorKind::Rreg,
            EstimatorKind::Qreg,
            EstimatorKind::QregBootstrap,
            EstimatorKind::Fe,
            EstimatorKind::Re,
        ] {
            assert_eq!(k.tag().parse::<EstimatorKind>().unwrap(), k);
        }
        assert!("lasso".parse::<EstimatorKind>().is_err());
    }
}
