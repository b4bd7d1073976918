//! Data matrices, orthonormal frames and subspace geometry.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance used by the [`OrthonormalFrame`] invariant check.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// An `n × p` observation matrix: rows are observations, columns features.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 || p < 2 {
            return Err(Error::Data(format!(
                "data matrix must be at least 2x2, got {n}x{p}"
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (idx % n, idx / n);
            return Err(Error::Data(format!(
                "non-finite entry at row {}, column {}",
                row + 1,
                col + 1
            )));
        }
        Ok(Self { values })
    }

    pub fn from_row_slice(n: usize, p: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::Dimension(format!(
                "expected {} values for a {n}x{p} matrix, got {}",
                n * p,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, p, data))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    /// Rows `rows` (0-based) as a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n()) {
            return Err(Error::Dimension(format!(
                "row index {bad} out of range for {} rows",
                self.n()
            )));
        }
        Self::new(self.values.select_rows(rows.iter()))
    }
}

/// A `p × d` matrix with orthonormal columns: a point on the Stiefel manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFrame {
    columns: DMatrix<f64>,
}

impl OrthonormalFrame {
    /// Wraps `columns` after checking `‖VᵀV − I‖_max ≤ 1e-8` and `1 ≤ d ≤ p`.
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        let (p, d) = columns.shape();
        if d == 0 || d > p {
            return Err(Error::Dimension(format!(
                "frame width must satisfy 1 <= d <= p, got p={p}, d={d}"
            )));
        }
        let err = linalg::orthonormality_error(&columns);
        if !(err <= ORTHONORMAL_TOL) {
            return Err(Error::Dimension(format!(
                "columns are not orthonormal (max |VᵀV - I| = {err:e})"
            )));
        }
        Ok(Self { columns })
    }

    /// Orthonormalizes arbitrary full-column-rank input via sign-normalized QR.
    pub fn from_span(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(linalg::orthonormalize(m))
    }

    pub(crate) fn from_trusted(columns: DMatrix<f64>) -> Self {
        debug_assert!(linalg::orthonormality_error(&columns) <= 1e-6);
        Self { columns }
    }

    pub fn p(&self) -> usize {
        self.columns.nrows()
    }

    pub fn d(&self) -> usize {
        self.columns.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.columns
    }

    pub fn orthonormality_error(&self) -> f64 {
        linalg::orthonormality_error(&self.columns)
    }

    /// `V Vᵀ`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.columns * self.columns.transpose()
    }

    /// Orthonormal basis of the orthogonal complement (width `p − d`).
    pub fn complement(&self) -> Result<Self> {
        if self.d() == self.p() {
            return Err(Error::Dimension(
                "a full-width frame has an empty complement".into(),
            ));
        }
        Ok(Self::from_trusted(linalg::complement_basis(&self.columns)))
    }
}

/// Haar-distributed random frame: sign-normalized QR of a `p × d` standard
/// normal matrix.
pub fn random_orthonormal_frame<R: Rng + ?Sized>(
    p: usize,
    d: usize,
    rng: &mut R,
) -> Result<OrthonormalFrame> {
    if d == 0 || d > p {
        return Err(Error::Dimension(format!(
            "random frame needs 1 <= d <= p, got p={p}, d={d}"
        )));
    }
    let gaussian = DMatrix::from_fn(p, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(OrthonormalFrame::from_trusted(linalg::orthonormalize(
        &gaussian,
    )))
}

/// Cosine of the largest canonical angle between two equal-width subspaces,
/// i.e. the smallest singular value of `AᵀB`.
pub fn largest_canonical_angle_cosine(a: &OrthonormalFrame, b: &OrthonormalFrame) -> Result<f64> {
    if a.p() != b.p() || a.d() != b.d() {
        return Err(Error::Dimension(format!(
            "frames must share shape, got {}x{} and {}x{}",
            a.p(),
            a.d(),
            b.p(),
            b.d()
        )));
    }
    let cross = a.as_matrix().tr_mul(b.as_matrix());
    let smallest = cross
        .singular_values()
        .iter()
        .fold(f64::INFINITY, |acc, &s| acc.min(s));
    Ok(smallest.clamp(0.0, 1.0))
}

/// PC affinity: `100 · cos θ_max`.
pub fn pc_affinity(a: &OrthonormalFrame, b: &OrthonormalFrame) -> Result<f64> {
    Ok(100.0 * largest_canonical_angle_cosine(a, b)?)
}
