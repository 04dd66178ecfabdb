//! Fit two regression models to the same data and test whether their
//! coefficients are equal.
//!
//! ```no_run
//! use paramcmp::{build_frame, fit, load_csv, BiasTestReport, EstimatorKind, EstimatorSpec, JointForm};
//!
//! let ds = load_csv("fixtures/crime.csv").unwrap();
//! let indep: Vec<String> = ["pctmetro", "pcths", "poverty"].map(String::from).to_vec();
//! let frame = build_frame(&ds, "crime", &indep, None).unwrap();
//! let ols = fit(&frame, &ds, &EstimatorSpec::new(EstimatorKind::Ols)).unwrap();
//! let rreg = fit(&frame, &ds, &EstimatorSpec::new(EstimatorKind::Rreg)).unwrap();
//! let report = BiasTestReport::from_fits(&ols, &rreg, &indep, JointForm::Sum).unwrap();
//! println!("chi2({}) = {:.4}", report.df_chi2, report.chi2);
//! ```

pub mod biastest;
pub mod cli;
pub mod data;
pub mod error;
pub mod estimators;
pub mod numerics;

pub use biastest::{
    align, joint_bias_test, run_biastest, variable_bias_test, AlignedPair, BiasTestReport, JointForm, JointTest,
    ModelSummary, VariableRow,
};
pub use data::{build_frame, load_csv, read_csv, Dataset, ModelFrame, RowFilter, INTERCEPT};
pub use error::{Error, Result};
pub use estimators::{fit, EstimatorKind, EstimatorSpec, FitResult};
