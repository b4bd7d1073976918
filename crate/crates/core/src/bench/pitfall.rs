use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Outcome of reducing `[a_i, εa_i, …, εa_i]` data by SVD before PCA.
#[derive(Debug, Clone, PartialEq)]
pub struct PitfallReport {
    pub p: usize,
    pub epsilon: f64,
    pub n: usize,
    /// Numerical rank of the corrupted matrix.
    pub rank: usize,
    /// `1/√(1 + ε²(p − 1))`.
    pub closed_form: f64,
    /// Norm of the projection of `e₁` onto the observed row space: the best
    /// cosine any direction surviving the reduction can reach.
    pub ceiling_cosine: f64,
    /// `|cos|` between `e₁` and the leading principal direction after the
    /// reduction.
    pub pca_cosine: f64,
}

impl PitfallReport {
    pub fn ceiling_affinity(&self) -> f64 {
        100.0 * self.ceiling_cosine
    }
}

/// Builds rows `a_i · [1, ε, …, ε]` with `a_i ~ N(0, 1)` and measures how much
/// of the true direction `e₁` survives an SVD reduction to the row space.
pub fn svd_pitfall_demo(p: usize, epsilon: f64, n: usize, seed: u64) -> Result<PitfallReport> {
    if p < 2 || n < 1 || !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Config(format!(
            "pitfall demo needs p >= 2, n >= 1 and finite epsilon > 0, got p = {p}, n = {n}, epsilon = {epsilon}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { a[i] } else { epsilon * a[i] });

    // row space from the n × n Gram matrix: X = UΣVᵀ gives V = XᵀUΣ⁻¹
    let eig = (&x * x.transpose()).symmetric_eigen();
    let top = eig.eigenvalues.max();
    let tol = top * 1e-12;
    let kept: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > tol).collect();
    let first_coord = |k: usize| {
        let sigma = eig.eigenvalues[k].sqrt();
        x.column(0).dot(&eig.eigenvectors.column(k)) / sigma
    };
    let ceiling = kept.iter().map(|&k| first_coord(k).powi(2)).sum::<f64>().sqrt();
    let lead = eig.eigenvalues.imax();
    Ok(PitfallReport {
        p,
        epsilon,
        n,
        rank: kept.len(),
        closed_form: 1.0 / (1.0 + epsilon * epsilon * (p - 1) as f64).sqrt(),
        ceiling_cosine: ceiling,
        pca_cosine: first_coord(lead).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_closed_form() {
        for (p, eps) in [(10001, 0.1), (2, 1.0), (50, 0.3)] {
            let r = svd_pitfall_demo(p, eps, 20, 1).unwrap();
            assert_eq!(r.rank, 1);
            assert!((r.ceiling_cosine - r.closed_form).abs() <= 1e-6, "{r:?}");
            assert!(r.pca_cosine <= r.ceiling_cosine + 1e-12);
        }
        let r = svd_pitfall_demo(10001, 0.1, 20, 1).unwrap();
        assert!((r.closed_form - 1.0 / 101f64.sqrt()).abs() < 1e-15);
        assert!((r.closed_form - 0.0995).abs() < 1e-4);
        let r = svd_pitfall_demo(2, 1.0, 5, 1).unwrap();
        assert!((r.closed_form - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn large_epsilon_drives_the_ceiling_to_zero() {
        let r = svd_pitfall_demo(100, 1e6, 5, 2).unwrap();
        assert!(r.ceiling_cosine < 1e-6);
        assert!(svd_pitfall_demo(1, 1.0, 5, 2).is_err());
    }
}
