//! Batch estimation of the orthogonal complement for large `p`: each round
//! removes `m_k` complement directions and shrinks the ambient dimension by
//! an SVD reduction before the next round.

use nalgebra::DMatrix;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::frame::{DataMatrix, OrthonormalFrame};
use crate::linalg;
use crate::outliers::OutlierMode;
use crate::solver::{fit, recover_pc_directions, Problem};

/// Largest batch the default plan takes.
pub const MAX_BATCH: usize = 100;
/// Remainders at or below this size are handled in one batch.
pub const MIN_SPLIT: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    pub sizes: Vec<usize>,
    /// Outer tolerance used for each batch, nonincreasing.
    pub tolerance_schedule: Vec<f64>,
}

impl BatchPlan {
    /// Plan with tolerances tightened geometrically from `10·tol_outer` to
    /// `tol_outer`.
    pub fn from_sizes(sizes: Vec<usize>, tol_outer: f64) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Config(format!("batch sizes must be positive, got {sizes:?}")));
        }
        let k = sizes.len();
        let tolerance_schedule = if k == 1 {
            vec![tol_outer]
        } else {
            let ratio = 0.1f64.powf(1.0 / (k - 1) as f64);
            (0..k).map(|i| 10.0 * tol_outer * ratio.powi(i as i32)).collect()
        };
        Ok(Self {
            sizes,
            tolerance_schedule,
        })
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn validate(&self, p: usize, r: usize) -> Result<()> {
        if r == 0 || r >= p {
            return Err(Error::Config(format!("rank must satisfy 1 <= r < p = {p}, got {r}")));
        }
        if self.total() != p - r {
            return Err(Error::Dimension(format!(
                "batch sizes {:?} sum to {}, expected d = p - r = {}",
                self.sizes,
                self.total(),
                p - r
            )));
        }
        if self.tolerance_schedule.len() != self.sizes.len() {
            return Err(Error::Dimension(format!(
                "{} tolerances for {} batches",
                self.tolerance_schedule.len(),
                self.sizes.len()
            )));
        }
        Ok(())
    }
}

/// Greedy plan: batches of 100 while more than 200 directions remain, then a
/// tail of one, two or three batches (sizes rounded to multiples of 5 when
/// that leaves a last batch of at least 25).
pub fn default_plan(p: usize, r: usize) -> Result<BatchPlan> {
    if r >= p {
        return Err(Error::Config(format!("need p - r >= 1, got p = {p}, r = {r}")));
    }
    let mut remaining = p - r;
    let mut sizes = Vec::new();
    while remaining > 2 * MAX_BATCH {
        sizes.push(MAX_BATCH);
        remaining -= MAX_BATCH;
    }
    if remaining <= MIN_SPLIT {
        sizes.push(remaining);
    } else if remaining <= 90 {
        let first = remaining.div_ceil(2);
        sizes.extend([first, remaining - first]);
    } else {
        let third = remaining.div_ceil(3);
        let rounded = third.div_ceil(5) * 5;
        let m = if remaining - 2 * rounded >= 25 { rounded } else { third };
        sizes.extend([m, m, remaining - 2 * m]);
    }
    BatchPlan::from_sizes(sizes, SolverConfig::default().tol_outer)
}

/// Runs one robust fit per batch. Batch `k` fits `m_k` complement directions
/// of the current reduced data `X_k`, then keeps the top right singular
/// vectors of `X_k(I − V⊥,k V⊥,kᵀ)` as the next basis. The returned `p × r`
/// frame is the product of all bases, ordered by an SVD of the final
/// reduced data. A batch whose `m_k` directions fit inside the null space of
/// `X_k` has an exact minimizer there, so no fit is run for it.
pub fn batch_fit(x: &DataMatrix, r: usize, plan: &BatchPlan, config: &SolverConfig) -> Result<OrthonormalFrame> {
    plan.validate(x.p(), r)?;
    if config.outlier_mode == OutlierMode::Element {
        return Err(Error::Config("batch fitting supports row outliers only".into()));
    }
    let mut reduced = x.values().clone();
    let mut basis: DMatrix<f64> = DMatrix::identity(x.p(), x.p());
    for (&m, &tol) in plan.sizes.iter().zip(&plan.tolerance_schedule) {
        let keep = reduced.ncols() - m;
        let (values, vectors) = linalg::right_singular_system(&reduced);
        let nullity = reduced.ncols() - linalg::numerical_rank(&values, reduced.shape());
        let v_k = if nullity >= m {
            // any m directions of the null space reach f = 0, and the reduction
            // then keeps the leading right singular vectors of X_k itself
            vectors.columns(0, keep).into_owned()
        } else {
            let cfg = SolverConfig {
                rank_r: keep,
                tol_outer: tol,
                ..config.clone()
            };
            let data = DataMatrix::new(reduced.clone())?;
            let result = fit(&Problem::new(data.clone(), cfg)?)?;
            recover_pc_directions(&data, &result, keep)?.into_inner()
        };
        reduced = &reduced * &v_k;
        basis = &basis * &v_k;
    }
    let (_, order) = linalg::right_singular_system(&reduced);
    Ok(OrthonormalFrame::from_trusted(basis * order.columns(0, r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{pc_affinity, random_orthonormal_frame};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn default_plans() {
        assert_eq!(default_plan(100, 3).unwrap().sizes, vec![35, 35, 27]);
        assert_eq!(default_plan(300, 3).unwrap().sizes, vec![100, 70, 70, 57]);
        assert_eq!(default_plan(500, 3).unwrap().sizes, vec![100, 100, 100, 70, 70, 57]);
        assert_eq!(default_plan(1000, 3).unwrap().sizes.len(), 11);
        for d in 1..=60 {
            assert_eq!(default_plan(d + 3, 3).unwrap().sizes, vec![d]);
        }
        for p in 4..1200 {
            let plan = default_plan(p, 3).unwrap();
            assert_eq!(plan.total(), p - 3);
            if p - 3 > MIN_SPLIT {
                assert!(plan.sizes.iter().all(|&m| (25..=100).contains(&m)), "{p}: {:?}", plan.sizes);
            }
        }
        assert!(default_plan(3, 3).is_err());
    }

    #[test]
    fn tolerances_tighten_geometrically() {
        let plan = BatchPlan::from_sizes(vec![10, 10, 10], 1e-6).unwrap();
        let t = &plan.tolerance_schedule;
        assert!((t[0] - 1e-5).abs() < 1e-18 && (t[2] - 1e-6).abs() < 1e-18);
        assert!((t[1] / t[0] - t[2] / t[1]).abs() < 1e-12);
    }

    fn clean_rank3(n: usize, p: usize, seed: u64) -> (DataMatrix, OrthonormalFrame) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_orthonormal_frame(p, 3, &mut rng).unwrap();
        let scale = DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 6.0, 3.0]));
        let scores = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal)) * scale;
        (DataMatrix::new(scores * v.as_matrix().transpose()).unwrap(), v)
    }

    #[test]
    fn noiseless_data_is_recovered_by_any_plan() {
        let (x, v) = clean_rank3(30, 12, 1);
        let cfg = SolverConfig::new(3).with_q(0);
        for sizes in [vec![9], vec![4, 5], vec![3, 3, 3]] {
            let plan = BatchPlan::from_sizes(sizes, 1e-6).unwrap();
            let got = batch_fit(&x, 3, &plan, &cfg).unwrap();
            assert!(got.orthonormality_error() <= 1e-8);
            assert!(pc_affinity(&got, &v).unwrap() > 100.0 - 1e-6);
        }
    }

    #[test]
    fn single_batch_matches_full_fit() {
        let (clean, _) = clean_rank3(30, 8, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let noisy = clean.values() + DMatrix::from_fn(30, 8, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
        let x = DataMatrix::new(noisy).unwrap();
        let cfg = SolverConfig::new(3).with_q(2).with_seed(5);
        let plan = BatchPlan::from_sizes(vec![5], cfg.tol_outer).unwrap();
        let batch = batch_fit(&x, 3, &plan, &cfg).unwrap();
        let full = fit(&Problem::new(x.clone(), cfg).unwrap()).unwrap();
        assert!(pc_affinity(&batch, &full.v_hat).unwrap() >= 99.0);
    }

    #[test]
    fn plan_mismatch_and_element_mode_are_rejected() {
        let (x, _) = clean_rank3(20, 8, 3);
        let cfg = SolverConfig::new(3).with_q(0);
        let bad = BatchPlan::from_sizes(vec![2, 2], 1e-6).unwrap();
        assert!(matches!(batch_fit(&x, 3, &bad, &cfg), Err(Error::Dimension(_))));
        let plan = BatchPlan::from_sizes(vec![5], 1e-6).unwrap();
        let element = cfg.with_mode(OutlierMode::Element);
        assert!(matches!(batch_fit(&x, 3, &plan, &element), Err(Error::Config(_))));
    }
}
