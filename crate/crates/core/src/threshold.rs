//! Thresholding rules `Θ`, their multivariate and quantile forms, the coupled
//! penalties `P`, and the residual map `ψ(t) = t − Θ(t)`.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::outliers::OutlierMode;

/// The scalar rule families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarKind {
    Soft,
    Hard,
    HardRidge,
}

impl std::str::FromStr for ScalarKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "soft" => Ok(ScalarKind::Soft),
            "hard" => Ok(ScalarKind::Hard),
            "hard-ridge" => Ok(ScalarKind::HardRidge),
            other => Err(format!(
                "unknown penalty '{other}' (expected soft, hard or hard-ridge)"
            )),
        }
    }
}

impl std::fmt::Display for ScalarKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScalarKind::Soft => "soft",
            ScalarKind::Hard => "hard",
            ScalarKind::HardRidge => "hard-ridge",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    Soft { lambda: f64 },
    Hard { lambda: f64 },
    HardRidge { lambda: f64, eta: f64 },
    /// Keeps the `budget` largest-magnitude entries, shrunk by `1/(1+η)`.
    QuantileElement { budget: usize, eta: f64 },
    /// Keeps the `budget` largest-norm rows, shrunk by `1/(1+η)`.
    QuantileRow { budget: usize, eta: f64 },
}

impl ThresholdRule {
    pub fn scalar(kind: ScalarKind, lambda: f64, eta: f64) -> Self {
        match kind {
            ScalarKind::Soft => ThresholdRule::Soft { lambda },
            ScalarKind::Hard => ThresholdRule::Hard { lambda },
            ScalarKind::HardRidge => ThresholdRule::HardRidge { lambda, eta },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ThresholdRule::Soft { .. } => "soft",
            ThresholdRule::Hard { .. } => "hard",
            ThresholdRule::HardRidge { .. } => "hard-ridge",
            ThresholdRule::QuantileElement { .. } => "quantile-element",
            ThresholdRule::QuantileRow { .. } => "quantile-row",
        }
    }

    pub fn is_scalar(&self) -> bool {
        !matches!(
            self,
            ThresholdRule::QuantileElement { .. } | ThresholdRule::QuantileRow { .. }
        )
    }

    /// `Θ(t; λ)`. The threshold itself is excluded: `|t| = λ` maps to 0.
    pub fn apply_scalar(&self, t: f64) -> Result<f64> {
        match *self {
            ThresholdRule::Soft { lambda } => Ok(t.signum() * (t.abs() - lambda).max(0.0)),
            ThresholdRule::Hard { lambda } => Ok(if t.abs() > lambda { t } else { 0.0 }),
            ThresholdRule::HardRidge { lambda, eta } => {
                Ok(if t.abs() > lambda { t / (1.0 + eta) } else { 0.0 })
            }
            _ => Err(Error::WrongArity(self.name())),
        }
    }

    /// The penalty `P(t; λ)` (with `P(0) = 0`) for which `Θ` is a proximal map:
    /// `Θ(y)` minimizes `½(y − s)² + P(s)`.
    pub fn penalty(&self, t: f64) -> Result<f64> {
        let nonzero = if t != 0.0 { 1.0 } else { 0.0 };
        match *self {
            ThresholdRule::Soft { lambda } => Ok(lambda * t.abs()),
            ThresholdRule::Hard { lambda } => Ok(0.5 * lambda * lambda * nonzero),
            ThresholdRule::HardRidge { lambda, eta } => {
                Ok(0.5 * lambda * lambda / (1.0 + eta) * nonzero + 0.5 * eta * t * t)
            }
            _ => Err(Error::WrongArity(self.name())),
        }
    }
}

pub fn apply_scalar(rule: &ThresholdRule, t: f64) -> Result<f64> {
    rule.apply_scalar(t)
}

/// Componentwise `Θ`.
pub fn apply_elementwise(rule: &ThresholdRule, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !rule.is_scalar() {
        return Err(Error::WrongArity(rule.name()));
    }
    Ok(m.map(|t| rule.apply_scalar(t).expect("scalar rule")))
}

/// Multivariate `Θ`: each row `s` becomes `s/‖s‖ · Θ(‖s‖)`, zero rows stay zero.
pub fn apply_rowwise(rule: &ThresholdRule, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !rule.is_scalar() {
        return Err(Error::WrongArity(rule.name()));
    }
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let factor = rule.apply_scalar(norm)? / norm;
        row *= factor;
    }
    Ok(out)
}

fn by_magnitude_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Keeps the `q_e` entries of largest absolute value, divided by `1 + η`;
/// everything else is set to zero. Ties are resolved in favour of the earlier
/// entry in row-major order.
pub fn quantile_threshold_elements(
    m: &DMatrix<f64>,
    q_e: usize,
    eta: f64,
) -> Result<DMatrix<f64>> {
    let (n, d) = m.shape();
    if q_e > n * d {
        return Err(Error::Config(format!(
            "element budget {q_e} exceeds the {} available entries",
            n * d
        )));
    }
    let mut ranked: Vec<(f64, usize)> = (0..n * d)
        .map(|idx| (m[(idx / d, idx % d)].abs(), idx))
        .collect();
    ranked.sort_by(by_magnitude_then_index);
    let shrink = 1.0 / (1.0 + eta);
    let mut out = DMatrix::zeros(n, d);
    for &(_, idx) in ranked.iter().take(q_e) {
        let (i, j) = (idx / d, idx % d);
        out[(i, j)] = m[(i, j)] * shrink;
    }
    Ok(out)
}

/// Keeps the `q` rows of largest Euclidean norm, divided by `1 + η`; other
/// rows become zero, and zero rows never receive mass. Ties go to the smaller
/// row index.
pub fn quantile_threshold_rows(m: &DMatrix<f64>, q: usize, eta: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if q > n {
        return Err(Error::Config(format!(
            "row budget {q} exceeds the {n} available rows"
        )));
    }
    let mut ranked: Vec<(f64, usize)> = m.row_iter().map(|r| r.norm()).zip(0..n).collect();
    ranked.sort_by(by_magnitude_then_index);
    let shrink = 1.0 / (1.0 + eta);
    let mut out = DMatrix::zeros(n, m.ncols());
    for &(norm, i) in ranked.iter().take(q) {
        if norm > 0.0 {
            out.set_row(i, &(m.row(i) * shrink));
        }
    }
    Ok(out)
}

/// Applies any rule to a whole matrix. Scalar rules act componentwise in
/// element mode and on row norms in row mode; quantile rules carry their own
/// geometry.
pub fn threshold_matrix(
    rule: &ThresholdRule,
    m: &DMatrix<f64>,
    mode: OutlierMode,
) -> Result<DMatrix<f64>> {
    match *rule {
        ThresholdRule::QuantileElement { budget, eta } => quantile_threshold_elements(m, budget, eta),
        ThresholdRule::QuantileRow { budget, eta } => quantile_threshold_rows(m, budget, eta),
        _ => match mode {
            OutlierMode::Element => apply_elementwise(rule, m),
            OutlierMode::Row => apply_rowwise(rule, m),
        },
    }
}

/// `ψ(M) = M − Θ(M)`, componentwise.
pub fn psi_residual(rule: &ThresholdRule, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(m - threshold_matrix(rule, m, OutlierMode::Element)?)
}

/// Multivariate `ψ(M) = M − Θ⃗(M)`.
pub fn psi_residual_rowwise(rule: &ThresholdRule, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(m - threshold_matrix(rule, m, OutlierMode::Row)?)
}

/// Total penalty `Σ P(|s_ij|)` (element mode) or `Σ P(‖s_i‖)` (row mode).
pub fn total_penalty(rule: &ThresholdRule, s: &DMatrix<f64>, mode: OutlierMode) -> Result<f64> {
    match mode {
        OutlierMode::Element => s.iter().map(|&v| rule.penalty(v)).sum(),
        OutlierMode::Row => s.row_iter().map(|r| rule.penalty(r.norm())).sum(),
    }
}
