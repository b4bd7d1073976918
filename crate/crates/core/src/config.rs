use crate::error::{Error, Result};
use crate::outliers::OutlierMode;
use crate::threshold::ScalarKind;

/// Tuning constants for a fit. Defaults follow the recommended settings:
/// `κ = 0.1`, `T = 10`, `ρ = 1e-3`, `η = 1e-3`, `ν = 0.05`, and a
/// `(m0, n0, m1) = (10, 2, 2)` multi-start.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Dimension `r` of the principal subspace; the solver estimates its
    /// `d = p − r` dimensional orthogonal complement.
    pub rank_r: usize,
    pub outlier_mode: OutlierMode,
    /// Outlier budget: rows (row mode) or entries (element mode). Selects the
    /// constrained form of the problem.
    pub q: Option<usize>,
    /// Ridge factor on `S`.
    pub eta: f64,
    /// Penalty level; selects the penalized form when set.
    pub lambda: Option<f64>,
    /// Thresholding rule used by the penalized form.
    pub penalty: ScalarKind,
    /// Backtracking factor.
    pub kappa: f64,
    /// Armijo slope.
    pub rho: f64,
    /// Nonmonotone reference window.
    pub window_t: usize,
    /// Cooling rate for the quantile budget.
    pub nu: f64,
    pub m0: usize,
    pub n0: usize,
    pub m1: usize,
    pub tol_outer: f64,
    pub tol_inner_s: f64,
    pub tol_grad: f64,
    pub tol_rel_f: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rank_r: 1,
            outlier_mode: OutlierMode::Row,
            q: None,
            eta: 1e-3,
            lambda: None,
            penalty: ScalarKind::Hard,
            kappa: 0.1,
            rho: 1e-3,
            window_t: 10,
            nu: 0.05,
            m0: 10,
            n0: 2,
            m1: 2,
            tol_outer: 1e-6,
            tol_inner_s: 1e-8,
            tol_grad: 1e-6,
            tol_rel_f: 1e-10,
            max_outer: 200,
            max_inner: 500,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn new(rank_r: usize) -> Self {
        Self {
            rank_r,
            ..Self::default()
        }
    }

    pub fn with_q(mut self, q: usize) -> Self {
        self.q = Some(q);
        self
    }

    pub fn with_mode(mut self, mode: OutlierMode) -> Self {
        self.outlier_mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_lambda(mut self, lambda: f64, penalty: ScalarKind) -> Self {
        self.lambda = Some(lambda);
        self.penalty = penalty;
        self
    }

    /// Checks the configuration against an `n × p` data matrix.
    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.rank_r == 0 || self.rank_r >= p {
            return fail(format!("rank must satisfy 1 <= r < p = {p}, got {}", self.rank_r));
        }
        let d = p - self.rank_r;
        match (self.q, self.lambda) {
            (None, None) => return fail("either a budget q or a penalty level lambda is required".into()),
            (Some(_), Some(_)) => return fail("q and lambda are mutually exclusive".into()),
            (Some(q), None) => {
                let cap = match self.outlier_mode {
                    OutlierMode::Row => n,
                    OutlierMode::Element => n * d,
                };
                if q >= cap {
                    return fail(format!(
                        "budget q = {q} must be below {cap} ({} mode, n = {n}, d = {d})",
                        self.outlier_mode
                    ));
                }
            }
            (None, Some(lambda)) => {
                if !(lambda >= 0.0) {
                    return fail(format!("lambda must be >= 0, got {lambda}"));
                }
            }
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return fail(format!("kappa must lie in (0, 1), got {}", self.kappa));
        }
        if !(self.rho > 0.0) {
            return fail(format!("rho must be > 0, got {}", self.rho));
        }
        if self.window_t == 0 {
            return fail("window T must be >= 1".into());
        }
        if !(self.eta >= 0.0) {
            return fail(format!("eta must be >= 0, got {}", self.eta));
        }
        if !(self.nu > 0.0) {
            return fail(format!("nu must be > 0, got {}", self.nu));
        }
        if self.m0 == 0 || self.m1 == 0 || self.m1 > self.m0 {
            return fail(format!(
                "multi-start sizes need 1 <= m1 <= m0, got m0 = {}, m1 = {}",
                self.m0, self.m1
            ));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return fail("iteration caps must be positive".into());
        }
        for (name, v) in [
            ("tol_outer", self.tol_outer),
            ("tol_inner_s", self.tol_inner_s),
            ("tol_grad", self.tol_grad),
            ("tol_rel_f", self.tol_rel_f),
        ] {
            if !(v >= 0.0) {
                return fail(format!("{name} must be >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_recommended_values() {
        let c = SolverConfig::default();
        assert_eq!((c.kappa, c.window_t, c.rho, c.eta, c.nu), (0.1, 10, 1e-3, 1e-3, 0.05));
        assert_eq!((c.m0, c.n0, c.m1), (10, 2, 2));
    }

    #[test]
    fn validation_catches_bad_settings() {
        let ok = SolverConfig::new(3).with_q(8);
        assert!(ok.validate(100, 10).is_ok());
        assert!(SolverConfig::new(10).with_q(8).validate(100, 10).is_err());
        assert!(SolverConfig::new(0).with_q(8).validate(100, 10).is_err());
        assert!(SolverConfig::new(3).with_q(100).validate(100, 10).is_err());
        assert!(SolverConfig::new(3).validate(100, 10).is_err());
        let element = SolverConfig::new(3).with_q(120).with_mode(OutlierMode::Element);
        assert!(element.validate(100, 18).is_ok());
        let mut bad = ok.clone();
        bad.kappa = 1.0;
        assert!(bad.validate(100, 10).is_err());
    }
}
