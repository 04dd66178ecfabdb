//! Equality tests for the coefficients of two fitted models.
//!
//! Each shared regressor gets a t test of `b1 - b2` with
//! `se = sqrt(se1^2 + se2^2)`; all of them together get a chi-squared test
//! `d' (V1 + V2)^-1 d`. Both treat the two estimates as independent.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{build_frame, Dataset, RowFilter, INTERCEPT};
use crate::error::{Error, Result};
use crate::estimators::{fit, EstimatorKind, EstimatorSpec, FitResult};
use crate::numerics::{chi2_sf, invert_spd, is_symmetric, student_t_sf2, SPD_TOL};

/// Which covariance matrix the joint statistic inverts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointForm {
    /// `V1 + V2`, the independent-estimates form.
    #[default]
    Sum,
    /// `V1 - V2`, the classical Hausman form. Only meaningful when model 1
    /// is consistent and model 2 efficient; kept as a diagnostic.
    Difference,
}

impl fmt::Display for JointForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JointForm::Sum => "sum",
            JointForm::Difference => "difference",
        })
    }
}

impl FromStr for JointForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(JointForm::Sum),
            "difference" | "diff" => Ok(JointForm::Difference),
            other => Err(Error::Usage(format!("unknown joint form `{other}` (use sum or difference)"))),
        }
    }
}

/// Coefficients and covariances of two fits restricted to their common
/// non-intercept regressors.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub names: Vec<String>,
    pub b1: DVector<f64>,
    pub b2: DVector<f64>,
    pub v1: DMatrix<f64>,
    pub v2: DMatrix<f64>,
    pub df1: Option<usize>,
    pub df2: Option<usize>,
    pub n1: usize,
    pub n2: usize,
    pub warnings: Vec<String>,
}

impl AlignedPair {
    /// Pair built from coefficients and standard errors alone (diagonal
    /// covariances), e.g. to test published estimates.
    pub fn from_estimates(
        names: &[&str],
        b1: &[f64],
        se1: &[f64],
        b2: &[f64],
        se2: &[f64],
        df1: Option<usize>,
        df2: Option<usize>,
    ) -> Result<Self> {
        let k = names.len();
        if [b1.len(), se1.len(), b2.len(), se2.len()].iter().any(|&l| l != k) {
            return Err(Error::Alignment("estimate vectors differ in length".into()));
        }
        let diag = |se: &[f64]| DMatrix::from_diagonal(&DVector::from_iterator(k, se.iter().map(|s| s * s)));
        Ok(Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            b1: DVector::from_column_slice(b1),
            b2: DVector::from_column_slice(b2),
            v1: diag(se1),
            v2: diag(se2),
            df1,
            df2,
            n1: 0,
            n2: 0,
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Degrees of freedom for the per-variable t tests: the smaller of the
    /// two residual dfs, the one that exists, or `None` (normal tails).
    pub fn t_df(&self) -> Option<usize> {
        match (self.df1, self.df2) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

/// Restrict two fits to the regressors they share, in `fit1`'s order,
/// leaving out the intercept.
pub fn align(fit1: &FitResult, fit2: &FitResult) -> Result<AlignedPair> {
    let mut warnings = Vec::new();
    let mut idx1 = Vec::new();
    let mut idx2 = Vec::new();
    let mut names = Vec::new();
    for (i, name) in fit1.names.iter().enumerate() {
        if name == INTERCEPT {
            continue;
        }
        match fit2.names.iter().position(|n| n == name) {
            Some(j) => {
                idx1.push(i);
                idx2.push(j);
                names.push(name.clone());
            }
            None => warnings.push(format!("`{name}` is not in model 2 and is not compared")),
        }
    }
    for name in &fit2.names {
        if name != INTERCEPT && !fit1.names.contains(name) {
            warnings.push(format!("`{name}` is not in model 1 and is not compared"));
        }
    }
    if names.is_empty() {
        return Err(Error::Alignment("the models share no regressors besides the intercept".into()));
    }
    let slice_b = |b: &DVector<f64>, idx: &[usize]| DVector::from_iterator(idx.len(), idx.iter().map(|&i| b[i]));
    let slice_v = |v: &DMatrix<f64>, idx: &[usize]| DMatrix::from_fn(idx.len(), idx.len(), |r, c| v[(idx[r], idx[c])]);
    Ok(AlignedPair {
        names,
        b1: slice_b(&fit1.beta, &idx1),
        b2: slice_b(&fit2.beta, &idx2),
        v1: slice_v(&fit1.vcov, &idx1),
        v2: slice_v(&fit2.vcov, &idx2),
        df1: fit1.df_resid,
        df2: fit2.df_resid,
        n1: fit1.n_obs,
        n2: fit2.n_obs,
        warnings,
    })
}

/// One row of the per-variable table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableRow {
    pub name: String,
    pub b1: f64,
    pub b2: f64,
    pub diff: f64,
    pub se1: f64,
    pub se2: f64,
    pub se_diff: f64,
    #[serde(with = "json_real")]
    pub t_stat: f64,
    pub p_value: f64,
}

/// Per-variable t tests. Returns the rows and any warnings.
pub fn variable_bias_test(pair: &AlignedPair) -> Result<(Vec<VariableRow>, Vec<String>)> {
    if pair.is_empty() {
        return Err(Error::Alignment("nothing to compare".into()));
    }
    let df = pair.t_df().map_or(f64::INFINITY, |d| d as f64);
    let mut warnings = Vec::new();
    let mut rows = Vec::with_capacity(pair.len());
    for (j, name) in pair.names.iter().enumerate() {
        let (b1, b2) = (pair.b1[j], pair.b2[j]);
        let se1 = pair.v1[(j, j)].max(0.0).sqrt();
        let se2 = pair.v2[(j, j)].max(0.0).sqrt();
        let diff = b1 - b2;
        let se_diff = (se1 * se1 + se2 * se2).sqrt();
        let (t_stat, p_value) = if se_diff > 0.0 {
            let t = diff / se_diff;
            (t, student_t_sf2(t, df)?)
        } else if diff == 0.0 {
            (0.0, 1.0)
        } else {
            warnings.push(format!("`{name}`: zero standard error with a nonzero difference"));
            (diff.signum() * f64::INFINITY, 0.0)
        };
        rows.push(VariableRow {
            name: name.clone(),
            b1,
            b2,
            diff,
            se1,
            se2,
            se_diff,
            t_stat,
            p_value,
        });
    }
    Ok((rows, warnings))
}

/// Outcome of the joint test.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTest {
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
    pub form: JointForm,
    /// True when the covariance was singular and a pseudo-inverse was used.
    pub pseudo_inverse: bool,
    pub warnings: Vec<String>,
}

/// Joint chi-squared test that all aligned coefficients are equal.
///
/// With [`JointForm::Sum`] the statistic is `d' (V1 + V2)^-1 d`. A singular
/// covariance is handled with a pseudo-inverse and the degrees of freedom
/// drop to its rank. [`JointForm::Difference`] inverts `V1 - V2` directly
/// when it is indefinite but nonsingular, so its statistic can be negative.
pub fn joint_bias_test(pair: &AlignedPair, form: JointForm) -> Result<JointTest> {
    if pair.is_empty() {
        return Err(Error::Alignment("nothing to compare".into()));
    }
    for (label, v) in [("model 1", &pair.v1), ("model 2", &pair.v2)] {
        if !is_symmetric(v, 1e-10) {
            return Err(Error::Contract(format!("{label} covariance is not symmetric")));
        }
    }
    let d = &pair.b1 - &pair.b2;
    let v = match form {
        JointForm::Sum => &pair.v1 + &pair.v2,
        JointForm::Difference => &pair.v1 - &pair.v2,
    };
    let mut warnings = Vec::new();
    let mut inv = invert_spd(&v, SPD_TOL)?;
    if inv.pseudo && form == JointForm::Difference {
        // V1 - V2 is often indefinite; the classical statistic still uses
        // its ordinary inverse and may come out negative
        if let Some(plain) = v.clone().try_inverse() {
            warnings.push("joint test: V1 - V2 is not positive definite; the statistic may be negative".into());
            inv.inverse = plain;
            inv.rank = pair.len();
            inv.pseudo = false;
        }
    }
    if inv.pseudo {
        warnings.push(format!(
            "joint test: covariance of the difference is not positive definite; used a pseudo-inverse of rank {} of {}",
            inv.rank,
            pair.len()
        ));
    }
    let chi2 = (d.transpose() * &inv.inverse * &d)[(0, 0)];
    let chi2 = if chi2 < 0.0 && chi2 > -1e-12 { 0.0 } else { chi2 };
    let df = inv.rank;
    let p_value = if df == 0 {
        warnings.push("joint test: covariance of the difference has rank 0".into());
        1.0
    } else {
        chi2_sf(chi2.max(0.0), df)?
    };
    Ok(JointTest {
        chi2,
        df,
        p_value,
        form,
        pseudo_inverse: inv.pseudo,
        warnings,
    })
}

/// Estimation summary of one model as carried in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub estimator: EstimatorKind,
    pub names: Vec<String>,
    pub b: Vec<f64>,
    pub se: Vec<f64>,
    pub n_obs: usize,
    pub df_resid: Option<usize>,
    pub converged: bool,
    /// Zero-based dataset rows the estimator discarded itself.
    pub dropped_rows: Vec<usize>,
    #[serde(with = "json_real::map")]
    pub diagnostics: BTreeMap<String, f64>,
}

impl From<&FitResult> for ModelSummary {
    fn from(fit: &FitResult) -> Self {
        Self {
            estimator: fit.estimator,
            names: fit.names.clone(),
            b: fit.beta.iter().copied().collect(),
            se: fit.se.iter().copied().collect(),
            n_obs: fit.n_obs,
            df_resid: fit.df_resid,
            converged: fit.converged,
            dropped_rows: fit.dropped_rows.clone(),
            diagnostics: fit.diagnostics.clone(),
        }
    }
}

/// Everything a comparison produces.
///
/// `b1`/`V1`/`b2`/`V2` echo the full coefficient vectors and covariance
/// matrices (intercept included, in each model's own order); `tstat` and
/// `pvalues` follow `rows`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasTestReport {
    pub depvar: String,
    pub indepvars: Vec<String>,
    pub model1: ModelSummary,
    pub model2: ModelSummary,
    pub b1: Vec<f64>,
    #[serde(rename = "V1")]
    pub v1: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
    #[serde(rename = "V2")]
    pub v2: Vec<Vec<f64>>,
    pub rows: Vec<VariableRow>,
    #[serde(with = "json_real::vec")]
    pub tstat: Vec<f64>,
    pub pvalues: Vec<f64>,
    /// Degrees of freedom of the per-variable t tests; `None` means normal tails.
    pub df_t: Option<usize>,
    pub joint_form: JointForm,
    pub chi2: f64,
    pub df_chi2: usize,
    pub p_chi2: f64,
    pub warnings: Vec<String>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl BiasTestReport {
    /// Compare two existing fits.
    pub fn from_fits(fit1: &FitResult, fit2: &FitResult, indepvars: &[String], form: JointForm) -> Result<Self> {
        let pair = align(fit1, fit2)?;
        let (rows, row_warnings) = variable_bias_test(&pair)?;
        let joint = joint_bias_test(&pair, form)?;

        let mut warnings = Vec::new();
        for (label, f) in [("model 1", fit1), ("model 2", fit2)] {
            warnings.extend(f.warnings.iter().map(|w| format!("{label}: {w}")));
        }
        warnings.extend(pair.warnings.iter().cloned());
        if fit1.n_obs != fit2.n_obs {
            warnings.push(format!(
                "the models use different samples ({} vs {} observations)",
                fit1.n_obs, fit2.n_obs
            ));
        }
        warnings.extend(row_warnings);
        warnings.extend(joint.warnings.iter().cloned());

        Ok(Self {
            depvar: fit1.depvar.clone(),
            indepvars: indepvars.to_vec(),
            model1: fit1.into(),
            model2: fit2.into(),
            b1: fit1.beta.iter().copied().collect(),
            v1: matrix_rows(&fit1.vcov),
            b2: fit2.beta.iter().copied().collect(),
            v2: matrix_rows(&fit2.vcov),
            tstat: rows.iter().map(|r| r.t_stat).collect(),
            pvalues: rows.iter().map(|r| r.p_value).collect(),
            rows,
            df_t: pair.t_df(),
            joint_form: form,
            chi2: joint.chi2,
            df_chi2: joint.df,
            p_chi2: joint.p_value,
            warnings,
        })
    }
}

/// Fit both models on one shared frame and compare them.
///
/// The frame is built once, so both models see the same sample unless an
/// estimator drops observations itself (as the robust fit does).
pub fn run_biastest(
    ds: &Dataset,
    depvar: &str,
    indep: &[String],
    filter: Option<&RowFilter>,
    spec1: &EstimatorSpec,
    spec2: &EstimatorSpec,
    form: JointForm,
) -> Result<BiasTestReport> {
    spec1.validate()?;
    spec2.validate()?;
    if (spec1.kind.is_panel() || spec2.kind.is_panel()) && ds.panel().is_none() {
        return Err(Error::Usage("panel estimators need a panel index (group and time variables)".into()));
    }
    let frame = build_frame(ds, depvar, indep, filter)?;
    let (fit1, fit2) = rayon::join(|| fit(&frame, ds, spec1), || fit(&frame, ds, spec2));
    BiasTestReport::from_fits(&fit1?, &fit2?, indep, form)
}

/// Serde helpers that write non-finite floats as the strings `"inf"`,
/// `"-inf"` and `"nan"` so they survive a JSON round trip.
mod json_real {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    struct Real(f64);

    impl Serialize for Real {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            let v = self.0;
            if v.is_finite() {
                s.serialize_f64(v)
            } else if v.is_nan() {
                s.serialize_str("nan")
            } else if v > 0.0 {
                s.serialize_str("inf")
            } else {
                s.serialize_str("-inf")
            }
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    impl<'de> Deserialize<'de> for Real {
        fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            match Repr::deserialize(d)? {
                Repr::Num(v) => Ok(Real(v)),
                Repr::Text(t) => match t.as_str() {
                    "inf" => Ok(Real(f64::INFINITY)),
                    "-inf" => Ok(Real(f64::NEG_INFINITY)),
                    "nan" => Ok(Real(f64::NAN)),
                    other => Err(serde::de::Error::custom(format!("not a number: `{other}`"))),
                },
            }
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        Real(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Real::deserialize(d).map(|r| r.0)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|x| Real(*x)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Ok(Vec::<Real>::deserialize(d)?.into_iter().map(|r| r.0).collect())
        }
    }

    pub mod map {
        use std::collections::BTreeMap;

        use super::*;

        pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
            s.collect_map(m.iter().map(|(k, v)| (k, Real(*v))))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
            Ok(BTreeMap::<String, Real>::deserialize(d)?
                .into_iter()
                .map(|(k, v)| (k, v.0))
                .collect())
        }
    }
}
