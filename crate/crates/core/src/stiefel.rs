//! Minimization of `f(V) = ½‖XV − 1μᵀ − S‖²_F` over orthonormal frames using
//! the Cayley retraction, alternating Barzilai–Borwein steps and a
//! nonmonotone (max-of-window) Armijo search.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::frame::{DataMatrix, OrthonormalFrame, ORTHONORMAL_TOL};
use crate::linalg;
use crate::outliers::OutlierMatrix;

/// BB steps are clamped to this range.
pub const TAU_MIN: f64 = 1e-10;
pub const TAU_MAX: f64 = 1e10;
/// Step used on the first iteration, before any BB differences exist.
pub const INITIAL_TAU: f64 = 0.5;
/// Backtracks allowed before a line search gives up.
pub const MAX_BACKTRACKS: usize = 60;
/// Accepted iterates are re-orthonormalized at least this often.
const REORTHONORMALIZE_EVERY: usize = 50;

/// Optimizer state at the current iterate.
#[derive(Debug, Clone)]
pub struct StiefelState {
    pub frame: OrthonormalFrame,
    /// Euclidean gradient `G = Xᵀ(XV − J)`.
    pub euclidean_grad: DMatrix<f64>,
    pub f_value: f64,
    /// The most recent `T + 1` accepted function values, newest last.
    pub f_history: VecDeque<f64>,
    pub iter: usize,
    pub prev_frame: Option<DMatrix<f64>>,
    pub prev_riemannian_grad: Option<DMatrix<f64>>,
}

impl StiefelState {
    pub fn new(frame: OrthonormalFrame, euclidean_grad: DMatrix<f64>, f_value: f64) -> Self {
        let mut f_history = VecDeque::new();
        f_history.push_back(f_value);
        Self {
            frame,
            euclidean_grad,
            f_value,
            f_history,
            iter: 0,
            prev_frame: None,
            prev_riemannian_grad: None,
        }
    }

    /// Dense skew-symmetric `W = G Vᵀ − V Gᵀ` (p × p).
    pub fn skew(&self) -> DMatrix<f64> {
        let v = self.frame.as_matrix();
        let g = &self.euclidean_grad;
        let a = g * v.transpose();
        &a - a.transpose()
    }

    /// Factors `A₁ = [G, V]`, `A₂ = [V, −G]` with `W = A₁A₂ᵀ`.
    pub fn factors(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let v = self.frame.as_matrix();
        let g = &self.euclidean_grad;
        let (p, d) = v.shape();
        let mut a1 = DMatrix::zeros(p, 2 * d);
        a1.columns_mut(0, d).copy_from(g);
        a1.columns_mut(d, d).copy_from(v);
        let mut a2 = DMatrix::zeros(p, 2 * d);
        a2.columns_mut(0, d).copy_from(v);
        a2.columns_mut(d, d).copy_from(&(-g));
        (a1, a2)
    }

    /// Largest value in the nonmonotone reference window.
    pub fn reference_value(&self) -> f64 {
        self.f_history.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `Xᵀ(XV − 1μᵀ − S)`.
pub fn euclidean_gradient(
    x: &DataMatrix,
    v: &OrthonormalFrame,
    mu: &DVector<f64>,
    s: &OutlierMatrix,
) -> Result<DMatrix<f64>> {
    check_shapes(x, v, mu, s)?;
    let residual = linalg::subtract_row(&(x.values() * v.as_matrix()), mu) - s.values();
    Ok(x.values().tr_mul(&residual))
}

fn check_shapes(x: &DataMatrix, v: &OrthonormalFrame, mu: &DVector<f64>, s: &OutlierMatrix) -> Result<()> {
    let (n, p) = (x.n(), x.p());
    let d = v.d();
    if v.p() != p || mu.len() != d || s.nrows() != n || s.ncols() != d {
        return Err(Error::Dimension(format!(
            "inconsistent shapes: X {n}x{p}, V {}x{d}, mu {}, S {}x{}",
            v.p(),
            mu.len(),
            s.nrows(),
            s.ncols()
        )));
    }
    Ok(())
}

/// Riemannian gradient under the canonical metric, `∇f = W V = G − V Gᵀ V`.
pub fn riemannian_gradient(state: &StiefelState) -> DMatrix<f64> {
    tangent_gradient(state.frame.as_matrix(), &state.euclidean_grad)
}

fn tangent_gradient(v: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    g - v * g.tr_mul(v)
}

/// `f′(0) = −½‖W‖²_F` along the Cayley curve, without forming `W`:
/// `‖W‖² = 2‖∇f‖² − ‖M − Mᵀ‖²` with `M = VᵀG`. The textbook form
/// `2‖G‖² − 2 tr(M²)` cancels badly once `‖G‖` is large and `VᵀV` has
/// drifted from `I` by rounding; this one stays within `[‖∇f‖², 2‖∇f‖²]`.
pub fn curve_derivative_at_zero(state: &StiefelState) -> f64 {
    slope_at_zero(state.frame.as_matrix(), &state.euclidean_grad)
}

fn slope_at_zero(v: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
    let m = v.tr_mul(g);
    slope_from(&(g - v * m.transpose()), &m)
}

fn slope_from(grad: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    let asym = (m - m.transpose()).norm_squared();
    -0.5 * (2.0 * grad.norm_squared() - asym).max(0.0)
}

/// Cayley update `V(τ) = V − τ A₁ (I + τ A₂ᵀA₁/2)⁻¹ A₂ᵀ V`. Falls back to the
/// dense `p × p` solve when `2d ≥ p`.
pub fn cayley_step(
    v: &OrthonormalFrame,
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    tau: f64,
) -> Result<OrthonormalFrame> {
    let (p, d) = (v.p(), v.d());
    if a1.shape() != a2.shape() || a1.nrows() != p {
        return Err(Error::Dimension(format!(
            "factor shapes {:?} and {:?} do not match a {p}-row frame",
            a1.shape(),
            a2.shape()
        )));
    }
    if 2 * d >= p {
        return cayley_step_dense(v, &(a1 * a2.transpose()), tau);
    }
    let k = a1.ncols();
    let mut system = a2.tr_mul(a1) * (0.5 * tau);
    for i in 0..k {
        system[(i, i)] += 1.0;
    }
    let rhs = a2.tr_mul(v.as_matrix());
    let z = system.lu().solve(&rhs).ok_or(Error::SingularStep { tau })?;
    finish_step(v.as_matrix() - a1 * z * tau, tau)
}

/// Dense Cayley update: solves `(I + τW/2) Y = (I − τW/2) V`.
pub fn cayley_step_dense(v: &OrthonormalFrame, w: &DMatrix<f64>, tau: f64) -> Result<OrthonormalFrame> {
    let p = v.p();
    if w.shape() != (p, p) {
        return Err(Error::Dimension(format!("W must be {p}x{p}, got {:?}", w.shape())));
    }
    let wv = w * v.as_matrix();
    dense_solve(v.as_matrix(), w, &wv, tau)
}

fn dense_solve(v: &DMatrix<f64>, w: &DMatrix<f64>, wv: &DMatrix<f64>, tau: f64) -> Result<OrthonormalFrame> {
    let p = v.nrows();
    let mut system = w * (0.5 * tau);
    for i in 0..p {
        system[(i, i)] += 1.0;
    }
    let rhs = v - wv * (0.5 * tau);
    let y = linalg::solve_dense(&system, &rhs).ok_or(Error::SingularStep { tau })?;
    finish_step(y, tau)
}

fn finish_step(y: DMatrix<f64>, tau: f64) -> Result<OrthonormalFrame> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularStep { tau });
    }
    // column norms are a cheap proxy; the full Gram check runs only when they drift
    let norms_ok = y
        .column_iter()
        .all(|c| (c.norm_squared() - 1.0).abs() <= 0.1 * ORTHONORMAL_TOL);
    if !norms_ok && linalg::orthonormality_error(&y) > ORTHONORMAL_TOL {
        return Ok(OrthonormalFrame::from_trusted(linalg::orthonormalize(&y)));
    }
    Ok(OrthonormalFrame::from_trusted(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(k: usize) -> Self {
        if k % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Alternating Barzilai–Borwein step. Even iterations use
/// `tr(δVᵀδV)/|tr(δVᵀδ∇f)|`, odd ones `|tr(δVᵀδ∇f)|/tr(δ∇fᵀδ∇f)`. The result
/// is clamped to `[TAU_MIN, TAU_MAX]`; `previous` is returned when both
/// differences vanish.
pub fn bb_stepsize(
    delta_v: &DMatrix<f64>,
    delta_grad: &DMatrix<f64>,
    parity: Parity,
    previous: f64,
) -> f64 {
    let vv = delta_v.norm_squared();
    let gg = delta_grad.norm_squared();
    if vv == 0.0 && gg == 0.0 {
        return previous;
    }
    let vg = delta_v.dot(delta_grad).abs();
    let tau = match parity {
        Parity::Even => vv / vg,
        Parity::Odd => vg / gg,
    };
    if tau.is_nan() {
        return TAU_MAX;
    }
    tau.clamp(TAU_MIN, TAU_MAX)
}

#[derive(Debug, Clone)]
pub struct Accepted<T> {
    pub point: T,
    pub value: f64,
    pub tau: f64,
    /// Number of backtracks `m` (the accepted step is `κ^m τ₀`).
    pub backtracks: usize,
}

#[derive(Debug, Clone)]
pub enum SearchOutcome<T> {
    Accepted(Accepted<T>),
    Stalled,
}

/// Nonmonotone backtracking: accepts the first `τ = κ^m τ₀` with
/// `f(τ) ≤ f_ref + ρ τ f′(0)`, where `f_ref` is the window maximum. `trial`
/// returns `None` when a step cannot be formed; that counts as a rejection.
pub fn nonmonotone_search<T, F>(
    f_ref: f64,
    slope: f64,
    tau0: f64,
    kappa: f64,
    rho: f64,
    mut trial: F,
) -> SearchOutcome<T>
where
    F: FnMut(f64) -> Option<(T, f64)>,
{
    let mut tau = tau0;
    for m in 0..=MAX_BACKTRACKS {
        if let Some((point, value)) = trial(tau) {
            if value <= f_ref + rho * tau * slope {
                return SearchOutcome::Accepted(Accepted {
                    point,
                    value,
                    tau,
                    backtracks: m,
                });
            }
        }
        tau *= kappa;
    }
    SearchOutcome::Stalled
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientSmall,
    RelativeChange,
    IterationCap,
    Stationary,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct StiefelOutcome {
    /// Best iterate seen.
    pub frame: OrthonormalFrame,
    pub f: f64,
    pub iterations: usize,
    /// `‖∇f‖_F` at the returned frame.
    pub grad_norm: f64,
    pub termination: Termination,
}

/// How trial points along the Cayley curve are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    /// `W = [Xᵀ, VRᵀ][VRᵀ, −Xᵀ]ᵀ` has rank at most `2n`; trials cost
    /// `O(n²d)` and the frame is built only once a step is accepted.
    Data,
    /// `W = [G, V][V, −G]ᵀ`, a `2d × 2d` inner system.
    LowRank,
    /// Full `p × p` solve.
    Dense,
}

impl Route {
    fn choose(n: usize, p: usize, d: usize) -> Self {
        if n < d && 2 * n < p {
            Route::Data
        } else if 2 * d < p {
            Route::LowRank
        } else {
            Route::Dense
        }
    }
}

/// Data-side quantities at an iterate.
struct Pieces {
    /// `XV`.
    xv: DMatrix<f64>,
    /// `R = XV − J`.
    residual: DMatrix<f64>,
    /// `VRᵀ`, kept on the data route only.
    vr: Option<DMatrix<f64>>,
}

/// `f` and its derivatives for a fixed target `J = 1μᵀ + S`.
struct SmoothObjective<'a> {
    x: &'a DMatrix<f64>,
    target: DMatrix<f64>,
    route: Route,
    /// `XXᵀ` on the data route.
    xx: Option<DMatrix<f64>>,
}

impl<'a> SmoothObjective<'a> {
    fn new(x: &'a DMatrix<f64>, target: DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let route = Route::choose(n, p, target.ncols());
        let xx = (route == Route::Data).then(|| x * x.transpose());
        Self { x, target, route, xx }
    }

    /// `f(V)` and the pieces at `V`; `xv` is reused when already known.
    fn pieces(&self, v: &DMatrix<f64>, xv: Option<DMatrix<f64>>) -> (f64, Pieces) {
        let xv = xv.unwrap_or_else(|| self.x * v);
        let residual = &xv - &self.target;
        let vr = (self.route == Route::Data).then(|| v * residual.transpose());
        (0.5 * residual.norm_squared(), Pieces { xv, residual, vr })
    }

    fn gradient(&self, pieces: &Pieces) -> DMatrix<f64> {
        self.x.tr_mul(&pieces.residual)
    }

    /// Riemannian gradient `G − VGᵀV` and `f′(0)`. On the data route
    /// `VGᵀV = (VRᵀ)(XV)` and `VᵀG = (XV)ᵀR`.
    fn tangent(&self, v: &DMatrix<f64>, g: &DMatrix<f64>, pieces: &Pieces) -> (DMatrix<f64>, f64) {
        match &pieces.vr {
            Some(vr) => {
                let grad = g - vr * &pieces.xv;
                let m = pieces.xv.tr_mul(&pieces.residual);
                let slope = slope_from(&grad, &m);
                (grad, slope)
            }
            None => {
                let vtg = v.tr_mul(g);
                let grad = g - v * vtg.transpose();
                let slope = slope_from(&grad, &vtg);
                (grad, slope)
            }
        }
    }

    fn curve<'b>(
        &'b self,
        v: &'b DMatrix<f64>,
        g: &'b DMatrix<f64>,
        grad: &DMatrix<f64>,
        pieces: &'b Pieces,
    ) -> CayleyCurve<'b> {
        let (p, d) = v.shape();
        let n = self.x.nrows();
        let kind = match (self.route, &self.xx, &pieces.vr) {
            (Route::Data, Some(xx), Some(vr)) => {
                let pm = &pieces.xv * pieces.residual.transpose();
                let mut inner = DMatrix::zeros(2 * n, 2 * n);
                inner.view_mut((0, 0), (n, n)).copy_from(&pm.transpose());
                inner
                    .view_mut((0, n), (n, n))
                    .copy_from(&(&pieces.residual * pieces.residual.transpose()));
                inner.view_mut((n, 0), (n, n)).copy_from(&(-xx));
                inner.view_mut((n, n), (n, n)).copy_from(&(-&pm));
                let mut rhs = DMatrix::zeros(2 * n, d);
                rhs.rows_mut(0, n).copy_from(&pieces.residual);
                rhs.rows_mut(n, n).copy_from(&(-&pieces.xv));
                CurveKind::Data { xx, vr, pm, inner, rhs }
            }
            _ if 2 * d < p => {
                let vtg = v.tr_mul(g);
                let gtg = g.tr_mul(g);
                let mut inner = DMatrix::zeros(2 * d, 2 * d);
                inner.view_mut((0, 0), (d, d)).copy_from(&vtg);
                inner.view_mut((0, d), (d, d)).fill_with_identity();
                inner.view_mut((d, 0), (d, d)).copy_from(&(-gtg));
                inner.view_mut((d, d), (d, d)).copy_from(&(-vtg.transpose()));
                let mut rhs = DMatrix::zeros(2 * d, d);
                rhs.view_mut((0, 0), (d, d)).fill_with_identity();
                rhs.view_mut((d, 0), (d, d)).copy_from(&(-vtg.transpose()));
                CurveKind::LowRank { inner, rhs }
            }
            _ => {
                let a = g * v.transpose();
                CurveKind::Dense {
                    w: &a - a.transpose(),
                    wv: grad.clone(),
                }
            }
        };
        CayleyCurve {
            objective: self,
            v,
            g,
            pieces,
            kind,
        }
    }
}

/// The Cayley curve through `V` in direction `−∇f`, with the τ-independent
/// pieces precomputed.
struct CayleyCurve<'a> {
    objective: &'a SmoothObjective<'a>,
    v: &'a DMatrix<f64>,
    g: &'a DMatrix<f64>,
    pieces: &'a Pieces,
    kind: CurveKind<'a>,
}

enum CurveKind<'a> {
    Data {
        xx: &'a DMatrix<f64>,
        vr: &'a DMatrix<f64>,
        /// `P = (XV)Rᵀ`.
        pm: DMatrix<f64>,
        /// `A₂ᵀA₁ = [[Pᵀ, RRᵀ], [−XXᵀ, −P]]`.
        inner: DMatrix<f64>,
        /// `A₂ᵀV = [R; −XV]`.
        rhs: DMatrix<f64>,
    },
    LowRank {
        /// `A₂ᵀA₁ = [[VᵀG, I], [−GᵀG, −GᵀV]]`.
        inner: DMatrix<f64>,
        /// `A₂ᵀV = [I; −GᵀV]`.
        rhs: DMatrix<f64>,
    },
    Dense {
        w: DMatrix<f64>,
        wv: DMatrix<f64>,
    },
}

/// A scored point on the curve.
struct Trial {
    tau: f64,
    step: TrialStep,
    xv: DMatrix<f64>,
}

enum TrialStep {
    Frame(OrthonormalFrame),
    /// Inner solution `z`; the frame is `V − τA₁z`.
    Coefficients(DMatrix<f64>),
}

fn shifted_solve(inner: &DMatrix<f64>, rhs: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    let mut system = inner * (0.5 * tau);
    for i in 0..system.nrows() {
        system[(i, i)] += 1.0;
    }
    linalg::solve_dense(&system, rhs).ok_or(Error::SingularStep { tau })
}

impl CayleyCurve<'_> {
    fn trial(&self, tau: f64) -> Result<(Trial, f64)> {
        let (step, xv) = match &self.kind {
            CurveKind::Data { xx, pm, inner, rhs, .. } => {
                let n = xx.nrows();
                let z = shifted_solve(inner, rhs, tau)?;
                let xv = &self.pieces.xv - (*xx * z.rows(0, n) + pm * z.rows(n, n)) * tau;
                (TrialStep::Coefficients(z), xv)
            }
            CurveKind::LowRank { inner, rhs } => {
                let d = self.v.ncols();
                let z = shifted_solve(inner, rhs, tau)?;
                let step = self.g * z.rows(0, d) + self.v * z.rows(d, d);
                let frame = finish_step(self.v - step * tau, tau)?;
                let xv = self.objective.x * frame.as_matrix();
                (TrialStep::Frame(frame), xv)
            }
            CurveKind::Dense { w, wv } => {
                let frame = dense_solve(self.v, w, wv, tau)?;
                let xv = self.objective.x * frame.as_matrix();
                (TrialStep::Frame(frame), xv)
            }
        };
        let f = 0.5 * (&xv - &self.objective.target).norm_squared();
        if !f.is_finite() {
            return Err(Error::SingularStep { tau });
        }
        Ok((Trial { tau, step, xv }, f))
    }

    /// The frame of an accepted trial, with `XV` when it is exact.
    fn realize(&self, trial: Trial) -> Result<(OrthonormalFrame, Option<DMatrix<f64>>)> {
        match (trial.step, &self.kind) {
            (TrialStep::Frame(frame), _) => Ok((frame, Some(trial.xv))),
            (TrialStep::Coefficients(z), CurveKind::Data { vr, xx, .. }) => {
                let n = xx.nrows();
                let step = self.objective.x.tr_mul(&z.rows(0, n)) + *vr * z.rows(n, n);
                Ok((finish_step(self.v - step * trial.tau, trial.tau)?, None))
            }
            (TrialStep::Coefficients(_), _) => unreachable!("coefficients come from the data route"),
        }
    }
}

/// Runs BB + nonmonotone Cayley iterations from `v0` until
/// `‖∇f‖ ≤ tol_grad (1 + |f|)`, the relative change in `f` drops below
/// `tol_rel_f`, or `max_inner` iterations. Returns the best iterate seen, so
/// the result never exceeds `f(v0)`.
pub fn minimize_on_stiefel(
    x: &DataMatrix,
    mu: &DVector<f64>,
    s: &OutlierMatrix,
    v0: &OrthonormalFrame,
    config: &SolverConfig,
) -> Result<StiefelOutcome> {
    check_shapes(x, v0, mu, s)?;
    let objective = SmoothObjective::new(x.values(), linalg::subtract_row(s.values(), &(-mu)));

    let (f0, mut pieces) = objective.pieces(v0.as_matrix(), None);
    let mut state = StiefelState::new(v0.clone(), objective.gradient(&pieces), f0);
    let (mut grad, mut slope) = objective.tangent(v0.as_matrix(), &state.euclidean_grad, &pieces);
    let mut grad_norm = grad.norm();
    let mut best = (state.frame.clone(), f0, grad_norm);
    let mut tau = INITIAL_TAU;
    let window = config.window_t + 1;

    let termination = loop {
        if grad_norm <= config.tol_grad * (1.0 + state.f_value.abs()) {
            break Termination::GradientSmall;
        }
        if state.iter >= config.max_inner {
            break Termination::IterationCap;
        }
        if !(slope < 0.0) {
            break Termination::Stationary;
        }
        if let (Some(prev_v), Some(prev_g)) = (&state.prev_frame, &state.prev_riemannian_grad) {
            let dv = state.frame.as_matrix() - prev_v;
            let dg = &grad - prev_g;
            tau = bb_stepsize(&dv, &dg, Parity::of(state.iter), tau);
        }

        let step = {
            let curve = objective.curve(state.frame.as_matrix(), &state.euclidean_grad, &grad, &pieces);
            let outcome = nonmonotone_search(
                state.reference_value(),
                slope,
                tau,
                config.kappa,
                config.rho,
                |t| curve.trial(t).ok(),
            );
            match outcome {
                SearchOutcome::Accepted(a) => {
                    let tau = a.tau;
                    curve.realize(a.point).ok().map(|(frame, xv)| (frame, xv, tau))
                }
                SearchOutcome::Stalled => None,
            }
        };
        let Some((mut frame, mut xv, accepted_tau)) = step else {
            break Termination::Stalled;
        };
        if (state.iter + 1) % REORTHONORMALIZE_EVERY == 0 {
            frame = OrthonormalFrame::from_trusted(linalg::orthonormalize(frame.as_matrix()));
            xv = None;
        }
        tau = accepted_tau;
        let (f_new, new_pieces) = objective.pieces(frame.as_matrix(), xv);
        pieces = new_pieces;

        let f_old = state.f_value;
        let prev_frame = std::mem::replace(&mut state.frame, frame);
        state.prev_frame = Some(prev_frame.into_inner());
        state.prev_riemannian_grad = Some(grad);
        state.euclidean_grad = objective.gradient(&pieces);
        state.f_value = f_new;
        state.f_history.push_back(f_new);
        while state.f_history.len() > window {
            state.f_history.pop_front();
        }
        state.iter += 1;
        (grad, slope) = objective.tangent(state.frame.as_matrix(), &state.euclidean_grad, &pieces);
        grad_norm = grad.norm();

        if f_new < best.1 {
            best = (state.frame.clone(), f_new, grad_norm);
        }
        let denom = f_old.abs();
        if denom > 0.0 && (f_new - f_old).abs() / denom <= config.tol_rel_f {
            break Termination::RelativeChange;
        }
    };

    Ok(StiefelOutcome {
        frame: best.0,
        f: best.1,
        iterations: state.iter,
        grad_norm: best.2,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::random_orthonormal_frame;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    fn state_for(v: OrthonormalFrame, g: DMatrix<f64>) -> StiefelState {
        StiefelState::new(v, g, 0.0)
    }

    fn f_of(x: &DataMatrix, v: &DMatrix<f64>, mu: &DVector<f64>, s: &OutlierMatrix) -> f64 {
        0.5 * (linalg::subtract_row(&(x.values() * v), mu) - s.values()).norm_squared()
    }

    #[test]
    fn gradient_vanishes_at_zero_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DataMatrix::new(gaussian(6, 4, &mut rng)).unwrap();
        let v = random_orthonormal_frame(4, 2, &mut rng).unwrap();
        let mu = DVector::from_vec(vec![0.3, -1.0]);
        let s = OutlierMatrix::new(linalg::subtract_row(&(x.values() * v.as_matrix()), &mu));
        let g = euclidean_gradient(&x, &v, &mu, &s).unwrap();
        assert!(g.abs().max() < 1e-12);
    }

    #[test]
    fn gradient_with_identity_data_is_the_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DataMatrix::new(DMatrix::identity(4, 4)).unwrap();
        let v = random_orthonormal_frame(4, 2, &mut rng).unwrap();
        let g = euclidean_gradient(&x, &v, &DVector::zeros(2), &OutlierMatrix::zeros(4, 2)).unwrap();
        assert!((g - v.as_matrix()).abs().max() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DataMatrix::new(gaussian(4, 3, &mut rng)).unwrap();
        let v = random_orthonormal_frame(3, 2, &mut rng).unwrap();
        let mu = DVector::from_vec(vec![0.2, 0.1]);
        let s = OutlierMatrix::new(gaussian(4, 2, &mut rng));
        let g = euclidean_gradient(&x, &v, &mu, &s).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            for j in 0..2 {
                let mut plus = v.as_matrix().clone();
                plus[(i, j)] += h;
                let mut minus = v.as_matrix().clone();
                minus[(i, j)] -= h;
                let fd = (f_of(&x, &plus, &mu, &s) - f_of(&x, &minus, &mu, &s)) / (2.0 * h);
                assert!((fd - g[(i, j)]).abs() <= 1e-5 * g[(i, j)].abs().max(1.0));
            }
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let x = DataMatrix::new(DMatrix::identity(4, 4)).unwrap();
        let v = OrthonormalFrame::new(DMatrix::identity(4, 2)).unwrap();
        let bad = euclidean_gradient(&x, &v, &DVector::zeros(3), &OutlierMatrix::zeros(4, 2));
        assert!(matches!(bad, Err(Error::Dimension(_))));
    }

    #[test]
    fn riemannian_gradient_zero_cases() {
        let v = OrthonormalFrame::new(DMatrix::identity(4, 2)).unwrap();
        let g = v.as_matrix().clone();
        assert!(riemannian_gradient(&state_for(v.clone(), g)).abs().max() < 1e-15);
        assert_eq!(riemannian_gradient(&state_for(v, DMatrix::zeros(4, 2))), DMatrix::zeros(4, 2));
    }

    #[test]
    fn riemannian_gradient_forms_agree_and_are_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = random_orthonormal_frame(5, 2, &mut rng).unwrap();
        let state = state_for(v.clone(), gaussian(5, 2, &mut rng));
        let grad = riemannian_gradient(&state);
        let via_w = state.skew() * v.as_matrix();
        assert!((&grad - via_w).abs().max() <= 1e-10);
        let sym = v.as_matrix().tr_mul(&grad) + grad.tr_mul(v.as_matrix());
        assert!(sym.abs().max() <= 1e-10);
        assert!((state.skew() + state.skew().transpose()).abs().max() <= 1e-10);
    }

    #[test]
    fn cayley_with_zero_skew_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_orthonormal_frame(6, 2, &mut rng).unwrap();
        let state = state_for(v.clone(), DMatrix::zeros(6, 2));
        let (a1, a2) = state.factors();
        for tau in [0.0, 0.7, 13.0] {
            let out = cayley_step(&v, &a1, &a2, tau).unwrap();
            assert!((out.as_matrix() - v.as_matrix()).abs().max() < 1e-15);
        }
    }

    #[test]
    fn cayley_hand_solved_rotation() {
        // p = 2, d = 1, V = e1, W = [[0, -1], [1, 0]], τ = 2:
        // (I + W)⁻¹(I − W) e1 = [0, -1]ᵀ.
        let v = OrthonormalFrame::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let w = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let dense = cayley_step_dense(&v, &w, 2.0).unwrap();
        assert!((dense.as_matrix() - DMatrix::from_column_slice(2, 1, &[0.0, -1.0])).abs().max() < 1e-12);
        // same W from factors: G = W V = [0, 1]ᵀ gives G Vᵀ − V Gᵀ = W
        let state = state_for(v.clone(), DMatrix::from_column_slice(2, 1, &[0.0, 1.0]));
        assert!((state.skew() - &w).abs().max() < 1e-15);
        let (a1, a2) = state.factors();
        let via_factors = cayley_step(&v, &a1, &a2, 2.0).unwrap();
        assert!((via_factors.as_matrix() - dense.as_matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn fast_and_dense_cayley_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = random_orthonormal_frame(6, 2, &mut rng).unwrap();
        let state = state_for(v.clone(), gaussian(6, 2, &mut rng));
        let (a1, a2) = state.factors();
        let fast = cayley_step(&v, &a1, &a2, 0.3).unwrap();
        // oracle: explicit inverse
        let w = state.skew();
        let eye = DMatrix::<f64>::identity(6, 6);
        let inv = (&eye + &w * 0.15).try_inverse().unwrap();
        let oracle = inv * (&eye - &w * 0.15) * v.as_matrix();
        assert!((fast.as_matrix() - oracle).abs().max() <= 1e-8);
        assert!(fast.orthonormality_error() <= 1e-12);
    }

    #[test]
    fn every_curve_route_matches_the_explicit_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        // (n, p, d): data route, low-rank route, dense route
        for (n, p, d, route) in [(3, 12, 8, Route::Data), (20, 12, 4, Route::LowRank), (20, 12, 9, Route::Dense)] {
            let x = gaussian(n, p, &mut rng);
            let v = random_orthonormal_frame(p, d, &mut rng).unwrap();
            let objective = SmoothObjective::new(&x, gaussian(n, d, &mut rng));
            assert_eq!(objective.route, route);
            let (f, pieces) = objective.pieces(v.as_matrix(), None);
            assert!((f - 0.5 * (&x * v.as_matrix() - &objective.target).norm_squared()).abs() <= 1e-12 * f);
            let g = objective.gradient(&pieces);
            let (grad, slope) = objective.tangent(v.as_matrix(), &g, &pieces);
            assert!((&grad - tangent_gradient(v.as_matrix(), &g)).abs().max() <= 1e-10 * g.abs().max());
            assert!((slope - slope_at_zero(v.as_matrix(), &g)).abs() <= 1e-10 * slope.abs());

            let state = state_for(v.clone(), g.clone());
            let w = state.skew();
            let curve = objective.curve(v.as_matrix(), &g, &grad, &pieces);
            for tau in [1e-3, 0.05, 0.4] {
                let (trial, f_trial) = curve.trial(tau).unwrap();
                let (frame, _) = curve.realize(trial).unwrap();
                let eye = DMatrix::<f64>::identity(p, p);
                let inv = (&eye + &w * (0.5 * tau)).try_inverse().unwrap();
                let oracle = inv * (&eye - &w * (0.5 * tau)) * v.as_matrix();
                assert!((frame.as_matrix() - &oracle).abs().max() <= 1e-8, "{route:?} tau {tau}");
                let f_oracle = 0.5 * (&x * &oracle - &objective.target).norm_squared();
                assert!((f_trial - f_oracle).abs() <= 1e-8 * f_oracle.max(1.0), "{route:?} tau {tau}");
            }
        }
    }

    #[test]
    fn curve_derivative_examples() {
        let v = OrthonormalFrame::new(DMatrix::identity(3, 1)).unwrap();
        assert_eq!(curve_derivative_at_zero(&state_for(v.clone(), DMatrix::zeros(3, 1))), 0.0);
        // G = √2 e2 gives W with entries ±√2, so ‖W‖_F = 2
        let g = DMatrix::from_column_slice(3, 1, &[0.0, 2f64.sqrt(), 0.0]);
        let state = state_for(v, g);
        assert!((state.skew().norm() - 2.0).abs() < 1e-12);
        assert!((curve_derivative_at_zero(&state) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn slope_survives_large_normal_gradient_and_drift() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let v = random_orthonormal_frame(8, 5, &mut rng).unwrap();
        let sym = gaussian(5, 5, &mut rng) * 300.0;
        let small = gaussian(8, 5, &mut rng) * 1e-2;
        let g = v.as_matrix() * (&sym + sym.transpose()) + small;
        let drifted = v.as_matrix() * (1.0 + 5e-9);
        let a = &g * drifted.transpose();
        let direct = -0.5 * (&a - a.transpose()).norm_squared();
        let slope = slope_at_zero(&drifted, &g);
        assert!(slope < 0.0);
        assert!((slope - direct).abs() <= 1e-3 * direct.abs(), "{slope} vs {direct}");
    }

    #[test]
    fn curve_derivative_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = DataMatrix::new(gaussian(8, 5, &mut rng)).unwrap();
        let v = random_orthonormal_frame(5, 2, &mut rng).unwrap();
        let mu = DVector::from_vec(vec![0.5, -0.5]);
        let s = OutlierMatrix::new(gaussian(8, 2, &mut rng));
        let g = euclidean_gradient(&x, &v, &mu, &s).unwrap();
        let state = state_for(v.clone(), g);
        let w = state.skew();
        let slope = curve_derivative_at_zero(&state);
        assert!((slope + 0.5 * w.norm_squared()).abs() <= 1e-10 * w.norm_squared());
        let h = 1e-6;
        let at = |t: f64| f_of(&x, cayley_step_dense(&v, &w, t).unwrap().as_matrix(), &mu, &s);
        let fd = (at(h) - at(-h)) / (2.0 * h);
        assert!((fd - slope).abs() <= 1e-4 * slope.abs());
    }

    #[test]
    fn bb_examples() {
        let dg = DMatrix::from_row_slice(2, 1, &[1.0, -2.0]);
        assert!((bb_stepsize(&dg, &dg, Parity::Even, 9.0) - 1.0).abs() < 1e-15);
        assert!((bb_stepsize(&dg, &dg, Parity::Odd, 9.0) - 1.0).abs() < 1e-15);
        let dv = &dg * 2.0;
        assert!((bb_stepsize(&dv, &dg, Parity::Even, 9.0) - 2.0).abs() < 1e-15);
        assert!((bb_stepsize(&dv, &dg, Parity::Odd, 9.0) - 2.0).abs() < 1e-15);
        let orth_v = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let orth_g = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert_eq!(bb_stepsize(&orth_v, &orth_g, Parity::Even, 9.0), TAU_MAX);
        assert_eq!(bb_stepsize(&orth_v, &orth_g, Parity::Odd, 9.0), TAU_MIN);
        let zero = DMatrix::zeros(2, 1);
        assert_eq!(bb_stepsize(&zero, &zero, Parity::Odd, 0.25), 0.25);
    }

    #[test]
    fn search_accepts_small_first_step_on_convex_curve() {
        // f(τ) = (τ − 1)², f(0) = 1, f′(0) = −2
        let out = nonmonotone_search(1.0, -2.0, 1e-3, 0.1, 1e-3, |t| Some(((), (t - 1.0f64).powi(2))));
        match out {
            SearchOutcome::Accepted(a) => assert_eq!(a.backtracks, 0),
            SearchOutcome::Stalled => panic!("stalled"),
        }
    }

    #[test]
    fn search_backtracks_until_decrease() {
        // f(τ) = 1 − τ + τ³ with f′(0) = −1: a huge τ₀ increases f.
        let f = |t: f64| 1.0 - t + t.powi(3);
        let out = nonmonotone_search(1.0, -1.0, 1e4, 0.1, 1e-3, |t| Some(((), f(t))));
        let SearchOutcome::Accepted(a) = out else { panic!("stalled") };
        assert!(a.value <= 1.0 - 1e-3 * a.tau);
        assert!(a.backtracks > 0);
    }

    #[test]
    fn search_matches_direct_scan() {
        let values = [5.0, 4.0, 3.1, 2.9, 1.0, 0.5];
        let (f_ref, slope, tau0, kappa, rho): (f64, f64, f64, f64, f64) = (3.0, -1.0, 100.0, 0.5, 1e-3);
        let lookup = |t: f64| {
            let m = (tau0 / t).log2().round() as usize;
            values.get(m).copied().unwrap_or(0.0)
        };
        let expected = (0..values.len())
            .find(|&m| values[m] <= f_ref + rho * tau0 * kappa.powi(m as i32) * slope)
            .unwrap();
        let SearchOutcome::Accepted(a) = nonmonotone_search(f_ref, slope, tau0, kappa, rho, |t| Some(((), lookup(t))))
        else {
            panic!("stalled")
        };
        assert_eq!(a.backtracks, expected);
    }

    #[test]
    fn search_stalls_without_decrease() {
        let out: SearchOutcome<()> = nonmonotone_search(1.0, -1.0, 1.0, 0.1, 1e-3, |_| Some(((), 2.0)));
        assert!(matches!(out, SearchOutcome::Stalled));
    }

    fn random_problem(seed: u64, n: usize, p: usize, d: usize) -> (DataMatrix, DVector<f64>, OutlierMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DataMatrix::new(gaussian(n, p, &mut rng)).unwrap();
        let mu = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = OutlierMatrix::new(gaussian(n, d, &mut rng) * 0.5);
        (x, mu, s)
    }

    #[test]
    fn already_optimal_start_returns_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = DataMatrix::new(gaussian(10, 4, &mut rng)).unwrap();
        let v = random_orthonormal_frame(4, 2, &mut rng).unwrap();
        let mu = DVector::from_vec(vec![1.0, 2.0]);
        let s = OutlierMatrix::new(linalg::subtract_row(&(x.values() * v.as_matrix()), &mu));
        let out = minimize_on_stiefel(&x, &mu, &s, &v, &SolverConfig::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.f < 1e-20);
        assert_eq!(out.frame, v);
    }

    #[test]
    fn converges_to_a_certified_stationary_point() {
        let (x, mu, s) = random_problem(9, 50, 5, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(90);
        let v0 = random_orthonormal_frame(5, 2, &mut rng).unwrap();
        let config = SolverConfig::default();
        let out = minimize_on_stiefel(&x, &mu, &s, &v0, &config).unwrap();
        assert!(out.grad_norm <= 1e-5 * (1.0 + out.f), "{out:?}");
        assert!(out.frame.orthonormality_error() <= 1e-8);
        assert!(out.f <= f_of(&x, v0.as_matrix(), &mu, &s));
        // first-order condition XᵀR = V RᵀX V
        let v = out.frame.as_matrix();
        let r = linalg::subtract_row(&(x.values() * v), &mu) - s.values();
        let xtr = x.values().tr_mul(&r);
        let rhs = v * r.tr_mul(&(x.values() * v));
        assert!((&xtr - rhs).norm() <= 1e-4 * xtr.norm().max(1.0));
    }

    #[test]
    fn same_subspace_starts_reach_the_same_value() {
        // f(VQ) = f(V) only when μ = 0 and S = 0; there every local minimum
        // is global, so both starts must land on the same value.
        let (x, _, _) = random_problem(10, 50, 5, 2);
        let (mu, s) = (DVector::zeros(2), OutlierMatrix::zeros(50, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let v0 = random_orthonormal_frame(5, 2, &mut rng).unwrap();
        let rot = random_orthonormal_frame(2, 2, &mut rng).unwrap();
        let v1 = OrthonormalFrame::new(v0.as_matrix() * rot.as_matrix()).unwrap();
        assert!((f_of(&x, v0.as_matrix(), &mu, &s) - f_of(&x, v1.as_matrix(), &mu, &s)).abs() < 1e-10);
        let config = SolverConfig::default();
        let a = minimize_on_stiefel(&x, &mu, &s, &v0, &config).unwrap();
        let b = minimize_on_stiefel(&x, &mu, &s, &v1, &config).unwrap();
        assert!((a.f - b.f).abs() <= 1e-8 * (1.0 + a.f), "{} vs {}", a.f, b.f);
        // and both reach the sum of the two smallest eigenvalues of XᵀX / 2
        let mut eig: Vec<f64> = x.values().tr_mul(x.values()).symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        assert!((a.f - 0.5 * (eig[0] + eig[1])).abs() <= 1e-8 * (1.0 + a.f));
    }

    #[test]
    fn dense_regime_also_converges() {
        let (x, mu, s) = random_problem(11, 30, 6, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(110);
        let v0 = random_orthonormal_frame(6, 4, &mut rng).unwrap();
        let out = minimize_on_stiefel(&x, &mu, &s, &v0, &SolverConfig::default()).unwrap();
        assert!(out.grad_norm <= 1e-5 * (1.0 + out.f), "{out:?}");
        assert!(out.frame.orthonormality_error() <= 1e-8);
    }
}
