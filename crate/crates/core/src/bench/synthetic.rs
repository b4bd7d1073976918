use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::frame::{random_orthonormal_frame, DataMatrix, OrthonormalFrame};
use crate::outliers::{Flagged, OutlierMatrix, OutlierMode};

/// Simulation model `X = U D V*ᵀ + (1μ*ᵀ + S*) V⊥*ᵀ + E`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    pub r: usize,
    /// Diagonal of `D`, strictly decreasing.
    pub d_values: Vec<f64>,
    pub sigma2: f64,
    /// Complement-space mean; zero when `None`.
    pub mu_star: Option<DVector<f64>>,
    pub outlier_mode: OutlierMode,
    /// Outlier rows (row mode) or entries (element mode).
    pub num_outliers: usize,
    /// Value of every planted outlier entry.
    pub leverage: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Row-outlier spec with `μ* = 0`.
    pub fn rows(n: usize, p: usize, d_values: Vec<f64>, sigma2: f64, num_outliers: usize, leverage: f64) -> Self {
        Self {
            n,
            p,
            r: d_values.len(),
            d_values,
            sigma2,
            mu_star: None,
            outlier_mode: OutlierMode::Row,
            num_outliers,
            leverage,
            seed: 0,
        }
    }

    /// Element-outlier spec with `μ* = 0`.
    pub fn elements(n: usize, p: usize, d_values: Vec<f64>, sigma2: f64, num_outliers: usize, leverage: f64) -> Self {
        Self {
            outlier_mode: OutlierMode::Element,
            ..Self::rows(n, p, d_values, sigma2, num_outliers, leverage)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn d(&self) -> usize {
        self.p - self.r
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n < 2 || self.p < 2 {
            return fail(format!("need n, p >= 2, got n = {}, p = {}", self.n, self.p));
        }
        if self.r == 0 || self.r >= self.p || self.r > self.n {
            return fail(format!("rank must satisfy 1 <= r < p and r <= n, got r = {}", self.r));
        }
        if self.d_values.len() != self.r {
            return fail(format!("{} singular values given for rank {}", self.d_values.len(), self.r));
        }
        if self.d_values.iter().any(|&v| !(v > 0.0)) || self.d_values.windows(2).any(|w| w[1] >= w[0]) {
            return fail(format!("singular values must be positive and strictly decreasing, got {:?}", self.d_values));
        }
        if !(self.sigma2 >= 0.0) || !self.leverage.is_finite() {
            return fail("noise variance must be >= 0 and leverage finite".into());
        }
        let cap = match self.outlier_mode {
            OutlierMode::Row => self.n,
            OutlierMode::Element => self.n * self.d(),
        };
        if self.num_outliers > cap {
            return fail(format!("{} outliers exceed the {cap} available {}s", self.num_outliers, self.outlier_mode));
        }
        if let Some(mu) = &self.mu_star {
            if mu.len() != self.d() {
                return fail(format!("mu* has length {}, expected {}", mu.len(), self.d()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub v_star: OrthonormalFrame,
    pub v_perp_star: OrthonormalFrame,
    pub s_star: OutlierMatrix,
    pub outliers: Flagged,
}

impl GroundTruth {
    pub fn outlier_rows(&self) -> Vec<usize> {
        self.outliers.rows()
    }
}

/// Draws `(X, truth)`. Random draws happen in a fixed order (U, then the
/// p × p orthogonal matrix, then element positions, then noise), so a seed
/// pins the data bit for bit.
pub fn generate(spec: &SyntheticSpec) -> Result<(DataMatrix, GroundTruth)> {
    spec.validate()?;
    let (n, p, r, d) = (spec.n, spec.p, spec.r, spec.d());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let u = random_orthonormal_frame(n, r, &mut rng)?;
    let full = random_orthonormal_frame(p, p, &mut rng)?;
    let v_star = full.as_matrix().columns(0, r).into_owned();
    let v_perp = full.as_matrix().columns(r, d).into_owned();

    let mut s = DMatrix::zeros(n, d);
    let outliers = match spec.outlier_mode {
        OutlierMode::Row => {
            for i in 0..spec.num_outliers {
                s.row_mut(i).fill(spec.leverage);
            }
            Flagged::Rows((0..spec.num_outliers).collect())
        }
        OutlierMode::Element => {
            let mut cells: Vec<(usize, usize)> = sample(&mut rng, n * d, spec.num_outliers)
                .into_iter()
                .map(|idx| (idx / d, idx % d))
                .collect();
            cells.sort_unstable();
            for &(i, j) in &cells {
                s[(i, j)] = spec.leverage;
            }
            Flagged::Elements(cells)
        }
    };
    let noise = Normal::new(0.0, spec.sigma2.sqrt()).map_err(|e| Error::Config(e.to_string()))?;
    let e = DMatrix::from_fn(n, p, |_, _| noise.sample(&mut rng));

    let mut shifted = s.clone();
    if let Some(mu) = &spec.mu_star {
        for mut row in shifted.row_iter_mut() {
            row += mu.transpose();
        }
    }
    let d_diag = DMatrix::from_diagonal(&DVector::from_vec(spec.d_values.clone()));
    let x = u.as_matrix() * d_diag * v_star.transpose() + shifted * v_perp.transpose() + e;
    let truth = GroundTruth {
        v_star: OrthonormalFrame::new(v_star)?,
        v_perp_star: OrthonormalFrame::new(v_perp)?,
        s_star: OutlierMatrix::new(s),
        outliers,
    };
    Ok((DataMatrix::new(x)?, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1(o: usize, l: f64) -> SyntheticSpec {
        SyntheticSpec::rows(100, 10, vec![60.0, 40.0, 20.0], 2.0, o, l).with_seed(3)
    }

    #[test]
    fn noiseless_model_is_low_rank() {
        let spec = SyntheticSpec::rows(30, 8, vec![5.0, 2.0], 0.0, 0, 0.0);
        let (x, truth) = generate(&spec).unwrap();
        assert!((x.values() * truth.v_perp_star.as_matrix()).abs().max() < 1e-12);
        let sv = x.values().singular_values();
        assert_eq!(sv.iter().filter(|&&v| v > 1e-10).count(), 2);
    }

    #[test]
    fn row_outliers_are_the_first_rows() {
        let (_, truth) = generate(&table1(4, 4.5)).unwrap();
        let s = truth.s_star.values();
        for i in 0..100 {
            let expect = if i < 4 { 4.5 } else { 0.0 };
            assert!(s.row(i).iter().all(|&v| v == expect));
        }
        assert_eq!(truth.outlier_rows(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn element_outliers_are_distinct_cells() {
        let spec = SyntheticSpec::elements(100, 18, vec![80.0, 60.0, 40.0], 0.5, 60, 15.0).with_seed(9);
        let (_, truth) = generate(&spec).unwrap();
        assert_eq!(truth.s_star.element_support().len(), 60);
        assert!(truth.s_star.values().iter().all(|&v| v == 0.0 || v == 15.0));
        assert_eq!(truth.outliers.len(), 60);
    }

    #[test]
    fn truth_is_jointly_orthonormal_and_deterministic() {
        let (x1, t) = generate(&table1(10, 3.5)).unwrap();
        let (x2, _) = generate(&table1(10, 3.5)).unwrap();
        assert_eq!(x1, x2);
        let mut joint = DMatrix::zeros(10, 10);
        joint.columns_mut(0, 3).copy_from(t.v_star.as_matrix());
        joint.columns_mut(3, 7).copy_from(t.v_perp_star.as_matrix());
        assert!((joint.tr_mul(&joint) - DMatrix::identity(10, 10)).abs().max() <= 1e-8);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = table1(4, 4.5);
        spec.d_values = vec![40.0, 60.0, 20.0];
        assert!(generate(&spec).is_err());
        assert!(generate(&table1(101, 4.5)).is_err());
        let mut spec = table1(4, 4.5);
        spec.r = 0;
        spec.d_values.clear();
        assert!(generate(&spec).is_err());
    }
}
