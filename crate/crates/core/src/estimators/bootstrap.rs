use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::ModelFrame;
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

use super::{fit_qreg, solve_quantile, EstimatorKind, EstimatorSpec, FitResult};

/// Quantile regression with case-resampling bootstrap covariance.
///
/// Point estimates are those of [`fit_qreg`]. Replicate `i` resamples `n`
/// rows with replacement from its own stream `(spec.seed, i)`; replicates
/// whose resampled design is degenerate are skipped. The covariance is the
/// sample covariance (denominator `R - 1`) of the successful replicate
/// coefficient vectors, accumulated in replicate order.
pub fn fit_qreg_bootstrap(frame: &ModelFrame, spec: &EstimatorSpec) -> Result<FitResult> {
    let base = fit_qreg(frame, spec)?;
    let n = frame.n();
    let p = frame.x.ncols();

    let draws: Vec<Option<DVector<f64>>> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = SeededRng::for_replicate(spec.seed, rep as u64);
            let rows: Vec<usize> = (0..n).map(|_| rng.next_index(n)).collect();
            let sample = frame.subset(&rows);
            solve_quantile(&sample.x, &sample.y, spec.q).ok().map(|s| s.beta)
        })
        .collect();

    let ok: Vec<&DVector<f64>> = draws.iter().flatten().collect();
    let failed = spec.reps - ok.len();
    if 2 * failed > spec.reps || ok.len() < 2 {
        return Err(Error::Bootstrap {
            failed,
            reps: spec.reps,
        });
    }

    let r = ok.len() as f64;
    let mut mean = DVector::zeros(p);
    for b in &ok {
        mean += *b;
    }
    mean /= r;
    let mut vcov = DMatrix::zeros(p, p);
    for b in &ok {
        let d = *b - &mean;
        vcov += &d * d.transpose();
    }
    vcov /= r - 1.0;

    let mut fit = FitResult::new(
        EstimatorKind::QregBootstrap,
        frame,
        base.beta.clone(),
        vcov,
        base.n_obs,
        base.df_resid,
    );
    fit.diagnostics = base.diagnostics;
    fit.warnings = base.warnings;
    fit.set("reps", spec.reps as f64);
    fit.set("bootstrap_failures", failed as f64);
    fit.set("seed", spec.seed as f64);
    if failed > 0 {
        fit.warnings.push(format!(
            "bootstrap: {failed} of {} replicates skipped (degenerate resample)",
            spec.reps
        ));
    }
    Ok(fit)
}
