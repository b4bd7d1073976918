//! Small dense kernels shared by the solver modules.

use nalgebra::{DMatrix, DVector};

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `max |AᵀA − I|`.
pub(crate) fn orthonormality_error(a: &DMatrix<f64>) -> f64 {
    let gram = a.tr_mul(a);
    let mut worst = 0.0_f64;
    for j in 0..gram.ncols() {
        for i in 0..gram.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Thin Q factor with the sign of each column chosen so that diag(R) ≥ 0.
pub(crate) fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols().min(r.nrows()) {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthonormal basis (p × (p − d)) of the orthogonal complement of the span
/// of `frame` (p × d, orthonormal columns).
pub(crate) fn complement_basis(frame: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, d) = frame.shape();
    let mut stacked = DMatrix::zeros(p, d + p);
    stacked.columns_mut(0, d).copy_from(frame);
    stacked.columns_mut(d, p).fill_with_identity();
    let q = orthonormalize(&stacked);
    q.columns(d, p - d).into_owned()
}

/// Singular values (descending) and the full square matrix of right singular
/// vectors (columns, same order) of an arbitrary matrix. Matrices with fewer
/// rows than columns are zero-padded so the basis is always complete.
pub(crate) fn right_singular_system(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let padded;
    let work = if rows < cols {
        let mut z = DMatrix::zeros(cols, cols);
        z.rows_mut(0, rows).copy_from(m);
        padded = z;
        &padded
    } else {
        m
    };
    let svd = work.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let mut basis = DMatrix::zeros(cols, cols);
    let mut values = Vec::with_capacity(cols);
    for (dst, &src) in order.iter().enumerate() {
        values.push(svd.singular_values[src]);
        let mut col = v_t.row(src).transpose();
        // Deterministic sign: largest-magnitude entry positive.
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        basis.set_column(dst, &col);
    }
    (values, basis)
}

pub(crate) fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows() as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

pub(crate) fn center_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let means = column_means(m);
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    out
}

/// `m − 1 vᵀ`.
pub(crate) fn subtract_row(m: &DMatrix<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-v[j]);
    }
    out
}

/// Number of singular values above `σ_max · max(rows, cols) · ε`.
pub(crate) fn numerical_rank(values: &[f64], shape: (usize, usize)) -> usize {
    let top = values.iter().copied().fold(0.0, f64::max);
    let tol = top * shape.0.max(shape.1) as f64 * f64::EPSILON;
    values.iter().filter(|&&v| v > tol).count()
}

/// Solves `M Y = rhs` by partially pivoted LU. Returns `None` when the
/// solution is not finite.
pub(crate) fn solve_dense(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    use faer::linalg::solvers::Solve;
    let (n, k) = (m.nrows(), rhs.ncols());
    let a = faer::MatRef::from_column_major_slice(m.as_slice(), n, n);
    let b = faer::MatRef::from_column_major_slice(rhs.as_slice(), n, k);
    let y = a.partial_piv_lu().solve(b);
    let out = DMatrix::from_fn(n, k, |i, j| y[(i, j)]);
    out.iter().all(|v| v.is_finite()).then_some(out)
}
