use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::frame::{pc_affinity, DataMatrix, OrthonormalFrame};
use crate::outliers::Flagged;
use crate::solver::FitResult;

use super::synthetic::GroundTruth;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `100 · cos θ` against the true principal subspace.
    pub affinity: f64,
    /// Fraction of true outliers not flagged.
    pub masking: f64,
    /// Fraction of clean observations flagged.
    pub swamping: f64,
    /// 1 when nothing was masked.
    pub joint_detection: f64,
    /// Share of clean-sample energy captured by the estimate.
    pub rav: Option<f64>,
    pub wall_time_seconds: f64,
}

/// Masking and swamping at the level of observations (rows). Element flags
/// are collapsed to the rows they touch.
pub fn detection_rates(truth_rows: &[usize], flagged_rows: &[usize], n: usize) -> (f64, f64) {
    let truth: BTreeSet<usize> = truth_rows.iter().copied().collect();
    let flagged: BTreeSet<usize> = flagged_rows.iter().copied().collect();
    let masking = if truth.is_empty() {
        0.0
    } else {
        truth.difference(&flagged).count() as f64 / truth.len() as f64
    };
    let clean = n - truth.len();
    let swamping = if clean == 0 {
        0.0
    } else {
        flagged.difference(&truth).count() as f64 / clean as f64
    };
    (masking, swamping)
}

/// `‖X⁰ V̂‖²_F / ‖X⁰‖²_F` for an orthonormal `V̂`, i.e. the energy of the
/// clean sample kept by the projection onto the estimated subspace.
pub fn robust_adjusted_variance(clean: &DataMatrix, v_hat: &OrthonormalFrame) -> Result<f64> {
    if clean.p() != v_hat.p() {
        return Err(Error::Dimension(format!("clean sample has {} columns, frame has {} rows", clean.p(), v_hat.p())));
    }
    let total = clean.values().norm_squared();
    if total == 0.0 {
        return Ok(1.0);
    }
    Ok((clean.values() * v_hat.as_matrix()).norm_squared() / total)
}

/// Scores any subspace estimate, with optional flags and clean sample.
pub fn evaluate_frame(
    v_hat: &OrthonormalFrame,
    flagged: Option<&Flagged>,
    truth: &GroundTruth,
    clean: Option<&DataMatrix>,
) -> Result<EvalReport> {
    let affinity = pc_affinity(v_hat, &truth.v_star)?;
    let (masking, swamping) = match flagged {
        Some(f) => detection_rates(&truth.outlier_rows(), &f.rows(), truth.s_star.nrows()),
        None => (f64::NAN, f64::NAN),
    };
    let joint_detection = if masking == 0.0 { 1.0 } else if masking.is_nan() { f64::NAN } else { 0.0 };
    let rav = clean.map(|c| robust_adjusted_variance(c, v_hat)).transpose()?;
    Ok(EvalReport {
        affinity,
        masking,
        swamping,
        joint_detection,
        rav,
        wall_time_seconds: 0.0,
    })
}

/// Scores a fit against the simulation truth. `clean` is the clean sample
/// `X⁰` used for the adjusted variance.
pub fn evaluate(result: &FitResult, truth: &GroundTruth, clean: Option<&DataMatrix>) -> Result<EvalReport> {
    evaluate_frame(&result.v_hat, Some(&result.flagged()), truth, clean)
}
