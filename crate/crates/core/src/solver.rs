//! Alternating minimization of the projected mean-shift objective: a
//! thresholding loop for `(μ, S)` and a Stiefel-manifold phase for `V⊥`,
//! wrapped in a multi-start driver.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::frame::{random_orthonormal_frame, DataMatrix, OrthonormalFrame};
use crate::linalg;
use crate::outliers::{Flagged, OutlierMatrix, OutlierMode};
use crate::stiefel::minimize_on_stiefel;
use crate::threshold::{threshold_matrix, total_penalty, ThresholdRule};

/// Relative tolerance of the stationarity certificate.
pub const STATIONARITY_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `‖S‖_{2,0} ≤ q` with a ridge on `S`.
    ConstrainedRow,
    /// `‖S‖_0 ≤ q_e` with a ridge on `S`.
    ConstrainedElement,
    /// Group penalty `Σ P(‖s_i‖; λ)`.
    PenalizedRow,
    /// Entrywise penalty `Σ P(|s_ij|; λ)`.
    PenalizedElement,
}

impl Variant {
    pub fn mode(self) -> OutlierMode {
        match self {
            Variant::ConstrainedRow | Variant::PenalizedRow => OutlierMode::Row,
            Variant::ConstrainedElement | Variant::PenalizedElement => OutlierMode::Element,
        }
    }

    pub fn is_constrained(self) -> bool {
        matches!(self, Variant::ConstrainedRow | Variant::ConstrainedElement)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::ConstrainedRow => "constrained-row",
            Variant::ConstrainedElement => "constrained-element",
            Variant::PenalizedRow => "penalized-row",
            Variant::PenalizedElement => "penalized-element",
        }
    }
}

/// Data plus a validated configuration.
#[derive(Debug, Clone)]
pub struct Problem {
    pub x: DataMatrix,
    pub config: SolverConfig,
    pub variant: Variant,
}

impl Problem {
    /// Validates `config` against `x`; the variant follows from whether a
    /// budget or a penalty level is set, and from the outlier mode.
    pub fn new(x: DataMatrix, config: SolverConfig) -> Result<Self> {
        config.validate(x.n(), x.p())?;
        let variant = match (config.q.is_some(), config.outlier_mode) {
            (true, OutlierMode::Row) => Variant::ConstrainedRow,
            (true, OutlierMode::Element) => Variant::ConstrainedElement,
            (false, OutlierMode::Row) => Variant::PenalizedRow,
            (false, OutlierMode::Element) => Variant::PenalizedElement,
        };
        Ok(Self { x, config, variant })
    }

    /// Width of `V⊥`.
    pub fn d(&self) -> usize {
        self.x.p() - self.config.rank_r
    }

    pub fn mode(&self) -> OutlierMode {
        self.variant.mode()
    }

    /// Number of candidate units (rows or entries) for the outlier budget.
    fn units(&self) -> usize {
        match self.mode() {
            OutlierMode::Row => self.x.n(),
            OutlierMode::Element => self.x.n() * self.d(),
        }
    }

    fn cooling(&self) -> Option<CoolingSchedule> {
        self.config
            .q
            .map(|q| CoolingSchedule::new(q, self.units(), self.config.nu))
    }

    fn rule_with_budget(&self, budget: Option<usize>) -> ThresholdRule {
        let eta = self.config.eta;
        match (budget, self.mode()) {
            (Some(budget), OutlierMode::Row) => ThresholdRule::QuantileRow { budget, eta },
            (Some(budget), OutlierMode::Element) => ThresholdRule::QuantileElement { budget, eta },
            (None, _) => ThresholdRule::scalar(
                self.config.penalty,
                self.config.lambda.expect("penalized variant has lambda"),
                eta,
            ),
        }
    }

    /// The thresholding rule at the final (target) budget.
    pub fn rule(&self) -> ThresholdRule {
        self.rule_with_budget(self.config.q)
    }
}

/// Progressive quantile cooling `q(k) = max(q, round(2N / (1 + e^{νk})))`,
/// starting from all `N` units eligible.
#[derive(Debug, Clone, PartialEq)]
pub struct CoolingSchedule {
    pub target_q: usize,
    pub units: usize,
    pub nu: f64,
    pub k: usize,
}

impl CoolingSchedule {
    pub fn new(target_q: usize, units: usize, nu: f64) -> Self {
        Self {
            target_q,
            units,
            nu,
            k: 0,
        }
    }

    pub fn budget_at(&self, k: usize) -> usize {
        let raw = 2.0 * self.units as f64 / (1.0 + (self.nu * k as f64).exp());
        (raw.round() as usize).max(self.target_q)
    }

    pub fn current(&self) -> usize {
        self.budget_at(self.k)
    }

    pub fn at_target(&self) -> bool {
        self.current() == self.target_q
    }

    pub fn advance(&mut self) {
        self.k += 1;
    }
}

fn check_frame(x: &DataMatrix, v: &OrthonormalFrame, mu: &DVector<f64>, s: &OutlierMatrix) -> Result<()> {
    let d = v.d();
    if v.p() != x.p() || mu.len() != d || s.nrows() != x.n() || s.ncols() != d {
        return Err(Error::Dimension(format!(
            "inconsistent shapes: X {}x{}, V {}x{d}, mu {}, S {}x{}",
            x.n(),
            x.p(),
            v.p(),
            mu.len(),
            s.nrows(),
            s.ncols()
        )));
    }
    Ok(())
}

fn loss(xv: &DMatrix<f64>, mu: &DVector<f64>, s: &OutlierMatrix) -> f64 {
    0.5 * (linalg::subtract_row(xv, mu) - s.values()).norm_squared()
}

/// Objective value at `(V⊥, μ, S)`: the squared loss plus the ridge
/// `(η/2)‖S‖²_F` (constrained variants) or the total penalty (penalized).
pub fn objective(problem: &Problem, v: &OrthonormalFrame, mu: &DVector<f64>, s: &OutlierMatrix) -> Result<f64> {
    check_frame(&problem.x, v, mu, s)?;
    if let Some(q) = problem.config.q {
        let used = s.support_size(problem.mode());
        if used > q {
            return Err(Error::Feasibility(format!(
                "S has {used} nonzero {}s, budget is {q}",
                problem.mode()
            )));
        }
    }
    let xv = problem.x.values() * v.as_matrix();
    objective_at(problem, &xv, mu, s)
}

fn objective_at(problem: &Problem, xv: &DMatrix<f64>, mu: &DVector<f64>, s: &OutlierMatrix) -> Result<f64> {
    let fit = loss(xv, mu, s);
    if problem.variant.is_constrained() {
        Ok(fit + 0.5 * problem.config.eta * s.values().norm_squared())
    } else {
        Ok(fit + total_penalty(&problem.rule(), s.values(), problem.mode())?)
    }
}

/// Block update of `(μ, S)` for fixed `V⊥`: iterates
/// `S ← Θ((I − 11ᵀ/n) XV⊥ + 1 s̄ᵀ)` (with `s̄` the column means of `S`) until
/// the largest entry change is at most `tol` or `max_iter` sweeps, then sets
/// `μ = (XV⊥ − S)ᵀ1/n`.
pub fn update_mu_s(
    x: &DataMatrix,
    v: &OrthonormalFrame,
    s0: &OutlierMatrix,
    rule: &ThresholdRule,
    mode: OutlierMode,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, OutlierMatrix)> {
    if v.p() != x.p() || s0.nrows() != x.n() || s0.ncols() != v.d() {
        return Err(Error::Dimension(format!(
            "S must be {}x{}, got {}x{}",
            x.n(),
            v.d(),
            s0.nrows(),
            s0.ncols()
        )));
    }
    let xv = x.values() * v.as_matrix();
    mu_s_from_projection(&xv, s0.values(), rule, mode, tol, max_iter)
}

fn mu_s_from_projection(
    xv: &DMatrix<f64>,
    s0: &DMatrix<f64>,
    rule: &ThresholdRule,
    mode: OutlierMode,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, OutlierMatrix)> {
    let centered = linalg::center_columns(xv);
    let mut s = s0.clone();
    for _ in 0..max_iter {
        let shifted = linalg::subtract_row(&centered, &(-linalg::column_means(&s)));
        let next = threshold_matrix(rule, &shifted, mode)?;
        let change = linalg::max_abs(&(&next - &s));
        s = next;
        if change <= tol {
            break;
        }
    }
    let mu = linalg::column_means(&(xv - &s));
    Ok((mu, OutlierMatrix::new(s)))
}

/// Residuals of the two first-order equations characterizing a fixed point:
/// `‖1ᵀψ(R)‖_max` and `‖Xᵀψ(R) − V⊥ψ(R)ᵀXV⊥‖_max` with `R = XV⊥ − 1μᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stationarity {
    pub mean_residual: f64,
    pub frame_residual: f64,
    /// `‖X‖_max √n`.
    pub scale: f64,
    /// Threshold level used for `ψ`. For budgeted fits this is the hard-ridge
    /// level implied by the budget.
    pub lambda: f64,
}

impl Stationarity {
    pub fn max_residual(&self) -> f64 {
        self.mean_residual.max(self.frame_residual)
    }

    pub fn certified(&self) -> bool {
        self.max_residual() <= STATIONARITY_TOL * self.scale
    }
}

/// Largest level that keeps exactly `q` of the given magnitudes: the midpoint
/// of the q-th and (q+1)-th largest.
fn implicit_lambda(mut magnitudes: Vec<f64>, q: usize) -> f64 {
    magnitudes.sort_by(|a, b| b.total_cmp(a));
    let above = if q == 0 { f64::INFINITY } else { magnitudes[q - 1] };
    let below = magnitudes.get(q).copied().unwrap_or(0.0);
    if above.is_infinite() {
        below * 2.0 + 1.0
    } else {
        0.5 * (above + below)
    }
}

pub fn stationarity(problem: &Problem, v: &OrthonormalFrame, mu: &DVector<f64>) -> Result<Stationarity> {
    let x = problem.x.values();
    let xv = x * v.as_matrix();
    let r = linalg::subtract_row(&xv, mu);
    let mode = problem.mode();
    let rule = match problem.config.q {
        Some(q) => {
            let magnitudes: Vec<f64> = match mode {
                OutlierMode::Row => r.row_iter().map(|row| row.norm()).collect(),
                OutlierMode::Element => r.iter().map(|t| t.abs()).collect(),
            };
            ThresholdRule::HardRidge {
                lambda: implicit_lambda(magnitudes, q),
                eta: problem.config.eta,
            }
        }
        None => problem.rule(),
    };
    let lambda = match rule {
        ThresholdRule::Soft { lambda } | ThresholdRule::Hard { lambda } | ThresholdRule::HardRidge { lambda, .. } => {
            lambda
        }
        _ => unreachable!("scalar rule"),
    };
    let psi = &r - threshold_matrix(&rule, &r, mode)?;
    let ones = DVector::from_element(x.nrows(), 1.0);
    let mean_residual = psi.tr_mul(&ones).amax();
    let frame_eq = x.tr_mul(&psi) - v.as_matrix() * psi.tr_mul(&xv);
    Ok(Stationarity {
        mean_residual,
        frame_residual: linalg::max_abs(&frame_eq),
        scale: linalg::max_abs(x) * (x.nrows() as f64).sqrt(),
        lambda,
    })
}

/// One multi-start candidate.
#[derive(Debug, Clone)]
struct Candidate {
    index: usize,
    v: OrthonormalFrame,
    mu: DVector<f64>,
    s: OutlierMatrix,
    schedule: Option<CoolingSchedule>,
    outer: usize,
    objective: f64,
    converged: bool,
    trace: Vec<f64>,
}

impl Candidate {
    fn start(problem: &Problem, index: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(problem.config.seed);
        rng.set_stream(index as u64);
        let v = random_orthonormal_frame(problem.x.p(), problem.d(), &mut rng)?;
        let d = problem.d();
        Ok(Self {
            index,
            v,
            mu: DVector::zeros(d),
            s: OutlierMatrix::zeros(problem.x.n(), d),
            schedule: problem.cooling(),
            outer: 0,
            objective: f64::INFINITY,
            converged: false,
            trace: Vec::new(),
        })
    }

    fn at_target(&self) -> bool {
        self.schedule.as_ref().is_none_or(CoolingSchedule::at_target)
    }

    fn rule(&self, problem: &Problem) -> ThresholdRule {
        problem.rule_with_budget(self.schedule.as_ref().map(CoolingSchedule::current))
    }

    /// One outer iteration: `(μ, S)` block, then the `V⊥` block.
    fn step(&mut self, problem: &Problem) -> Result<()> {
        let cfg = &problem.config;
        let x = &problem.x;
        let rule = self.rule(problem);
        let xv = x.values() * self.v.as_matrix();
        let (mu, s) = mu_s_from_projection(&xv, self.s.values(), &rule, problem.mode(), cfg.tol_inner_s, cfg.max_inner)?;
        let phase = minimize_on_stiefel(x, &mu, &s, &self.v, cfg)?;
        let delta = linalg::max_abs(&(phase.frame.projector() - self.v.projector())) / x.p() as f64;
        let at_target = self.at_target();
        self.v = phase.frame;
        self.mu = mu;
        self.s = s;
        self.objective = phase.f + self.penalty_of_s(problem)?;
        self.trace.push(self.objective);
        self.outer += 1;
        if let Some(schedule) = self.schedule.as_mut() {
            schedule.advance();
        }
        self.converged = at_target && delta <= cfg.tol_outer;
        Ok(())
    }

    fn penalty_of_s(&self, problem: &Problem) -> Result<f64> {
        if problem.variant.is_constrained() {
            Ok(0.5 * problem.config.eta * self.s.values().norm_squared())
        } else {
            total_penalty(&problem.rule(), self.s.values(), problem.mode())
        }
    }

    fn run_to_convergence(&mut self, problem: &Problem) -> Result<()> {
        while !self.converged && (self.outer < problem.config.max_outer || !self.at_target()) {
            self.step(problem)?;
        }
        Ok(())
    }
}

/// Output of [`fit`].
#[derive(Debug, Clone)]
pub struct FitResult {
    pub variant: Variant,
    /// Estimated orthogonal complement `V̂⊥` (p × d).
    pub v_perp: OrthonormalFrame,
    pub mu: DVector<f64>,
    pub s: OutlierMatrix,
    /// Principal directions recovered from `V̂⊥` (p × r), ordered by
    /// decreasing singular value.
    pub v_hat: OrthonormalFrame,
    pub objective: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Index of the multi-start candidate that won.
    pub candidate: usize,
    pub stationarity: Stationarity,
    /// Objective after each outer iteration of the winning candidate.
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn flagged(&self) -> Flagged {
        self.s.flagged(self.variant.mode())
    }

    pub fn to_json(&self) -> Value {
        let matrix = |m: &DMatrix<f64>| -> Value {
            m.row_iter()
                .map(|r| r.iter().copied().collect::<Vec<f64>>())
                .collect::<Vec<_>>()
                .into()
        };
        let flagged = match self.flagged() {
            Flagged::Rows(rows) => json!(rows),
            Flagged::Elements(e) => json!(e),
        };
        json!({
            "variant": self.variant.name(),
            "objective": self.objective,
            "outer_iterations": self.outer_iterations,
            "converged": self.converged,
            "candidate": self.candidate,
            "stationarity": {
                "mean_residual": self.stationarity.mean_residual,
                "frame_residual": self.stationarity.frame_residual,
                "scale": self.stationarity.scale,
                "lambda": self.stationarity.lambda,
            },
            "v_perp": matrix(self.v_perp.as_matrix()),
            "v_hat": matrix(self.v_hat.as_matrix()),
            "mu": self.mu.iter().copied().collect::<Vec<f64>>(),
            "s": matrix(self.s.values()),
            "flagged": flagged,
            "trace": self.trace,
        })
    }
}

/// Multi-start alternating minimization. `m0` random starts run `n0` outer
/// iterations each; the best `m1` (by objective, then index) continue until
/// the projector change `‖ΔP‖_max / p` drops to `tol_outer` at the target
/// budget, or `max_outer` iterations. Candidates run in parallel, and the
/// result does not depend on the thread count.
pub fn fit(problem: &Problem) -> Result<FitResult> {
    let cfg = &problem.config;
    let mut candidates: Vec<Candidate> = (0..cfg.m0)
        .into_par_iter()
        .map(|i| {
            let mut c = Candidate::start(problem, i)?;
            for _ in 0..cfg.n0 {
                c.step(problem)?;
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;
    candidates.sort_by(|a, b| a.objective.total_cmp(&b.objective).then(a.index.cmp(&b.index)));
    candidates.truncate(cfg.m1);
    let finished: Vec<Candidate> = candidates
        .into_par_iter()
        .map(|mut c| {
            c.run_to_convergence(problem)?;
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let best = finished
        .into_iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective).then(a.index.cmp(&b.index)))
        .expect("m1 >= 1");
    finish(problem, best)
}

fn finish(problem: &Problem, best: Candidate) -> Result<FitResult> {
    let cfg = &problem.config;
    let xv = problem.x.values() * best.v.as_matrix();
    let (mu, s) = mu_s_from_projection(&xv, best.s.values(), &problem.rule(), problem.mode(), cfg.tol_inner_s, cfg.max_inner)?;
    let objective = objective_at(problem, &xv, &mu, &s)?;
    let stationarity = stationarity(problem, &best.v, &mu)?;
    let v_hat = pc_directions(&problem.x, &best.v, cfg.rank_r)?;
    Ok(FitResult {
        variant: problem.variant,
        v_perp: best.v,
        mu,
        s,
        v_hat,
        objective,
        outer_iterations: best.outer,
        converged: best.converged,
        candidate: best.index,
        stationarity,
        trace: best.trace,
    })
}

/// Top-r right singular vectors of `X(I − V̂⊥V̂⊥ᵀ)`, by decreasing singular
/// value.
pub fn recover_pc_directions(x: &DataMatrix, result: &FitResult, r: usize) -> Result<OrthonormalFrame> {
    pc_directions(x, &result.v_perp, r)
}

fn pc_directions(x: &DataMatrix, v_perp: &OrthonormalFrame, r: usize) -> Result<OrthonormalFrame> {
    let p = x.p();
    if v_perp.p() != p {
        return Err(Error::Dimension(format!("frame has {} rows, data has {p} columns", v_perp.p())));
    }
    let free = p - v_perp.d();
    if r == 0 || r > free {
        return Err(Error::Dimension(format!(
            "cannot recover {r} directions from a {free}-dimensional complement"
        )));
    }
    let basis = linalg::complement_basis(v_perp.as_matrix());
    let (_, w) = linalg::right_singular_system(&(x.values() * &basis));
    Ok(OrthonormalFrame::from_trusted(basis * w.columns(0, r)))
}

/// Extracts principal directions one at a time with rank-1 fits. Each step
/// works on the data expressed in an orthonormal basis of the complement of
/// the directions found so far, which is deflation with exact orthogonality.
pub fn sequential_fit(x: &DataMatrix, r: usize, config: &SolverConfig) -> Result<OrthonormalFrame> {
    let p = x.p();
    if r == 0 || r >= p {
        return Err(Error::Config(format!("rank must satisfy 1 <= r < p = {p}, got {r}")));
    }
    let mut found = DMatrix::<f64>::zeros(p, 0);
    for k in 0..r {
        let basis = if k == 0 {
            DMatrix::identity(p, p)
        } else {
            linalg::complement_basis(&found)
        };
        let reduced = DataMatrix::new(x.values() * &basis)?;
        let cfg = SolverConfig {
            rank_r: 1,
            ..config.clone()
        };
        let result = fit(&Problem::new(reduced, cfg)?)?;
        let direction = &basis * result.v_hat.as_matrix();
        found = found.insert_column(k, 0.0);
        found.set_column(k, &direction.column(0));
    }
    Ok(OrthonormalFrame::from_trusted(found))
}

/// Top-r right singular vectors of the column-centered data.
pub fn plain_pca(x: &DataMatrix, r: usize) -> Result<OrthonormalFrame> {
    let p = x.p();
    if r == 0 || r > p {
        return Err(Error::Config(format!("rank must satisfy 1 <= r <= p = {p}, got {r}")));
    }
    let (_, w) = linalg::right_singular_system(&linalg::center_columns(x.values()));
    Ok(OrthonormalFrame::from_trusted(w.columns(0, r).into_owned()))
}
