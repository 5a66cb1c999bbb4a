//! Optimization drivers: single-level descent on the box manifold, the
//! projected-gradient baseline, and the two-level schemes that compute
//! search directions on a coarser grid.
//!
//! All four modes share the same bookkeeping: an iterate, its objective
//! evaluation, a cumulative count of fine-level evaluations (line-search
//! probes included), and a trace record per outer iteration. The two-level
//! modes additionally maintain the last point that initiated a coarse
//! correction, so the invocation test can refuse to revisit a neighborhood
//! it just came from.

use std::time::Instant;

use crate::linesearch::{
    armijo_search, hz_search, ArmijoOutcome, ArmijoParams, WolfeParams, MIN_STEP,
};
use crate::manifold::{exp_inv, exp_map, inner, logit, riem_grad, BoxPoint, Tangent};
use crate::objective::{self, ObjectiveError, ObjectiveEval, Problem};
use crate::trace::{IterateRecord, Level, RunStatus, RunTrace};
use crate::transfer::{GridHierarchy, TransferError};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("{name} must be {constraint}, got {value}")]
    InvalidParam {
        name: &'static str,
        constraint: &'static str,
        value: f64,
    },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    LineSearch(#[from] crate::linesearch::LineSearchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    /// Riemannian gradient descent on the fine grid only.
    SingleRg,
    /// Projected gradient baseline on the fine grid only.
    SinglePg,
    /// Riemannian descent with geometric coarse corrections.
    TwoLevelRg,
    /// Projected gradient with Euclidean coarse corrections.
    TwoLevelEuclidean,
}

impl SolverMode {
    pub const ALL: [SolverMode; 4] = [
        SolverMode::SingleRg,
        SolverMode::SinglePg,
        SolverMode::TwoLevelRg,
        SolverMode::TwoLevelEuclidean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverMode::SingleRg => "single_rg",
            SolverMode::SinglePg => "single_pg",
            SolverMode::TwoLevelRg => "two_level_rg",
            SolverMode::TwoLevelEuclidean => "two_level_euclidean",
        }
    }
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SolverMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown solver mode {s:?}"))
    }
}

/// Everything a single run needs besides the problem itself.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: SolverMode,
    /// Coarse-invocation threshold: the restricted gradient must carry at
    /// least this fraction of the fine gradient norm.
    pub eta: f64,
    /// Minimum distance from the last coarse-initiating point.
    pub eps_dist: f64,
    pub max_iter: usize,
    /// Step budget for the coarse-model minimization. Zero disables coarse
    /// corrections entirely, making the two-level modes reproduce their
    /// single-level counterparts step for step.
    pub coarse_iters: usize,
    /// Stop when the Riemannian gradient norm falls below this.
    pub gtol: f64,
    /// Every component of the start vector.
    pub init_value: f64,
    pub wolfe: WolfeParams,
    pub armijo: ArmijoParams,
    /// Record wall-clock seconds in traces. Off by default so that traces
    /// are byte-identical across reruns.
    pub wall_clock: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: SolverMode::SingleRg,
            eta: 0.49,
            eps_dist: 1e-3,
            max_iter: 50,
            coarse_iters: 5,
            gtol: 1e-8,
            init_value: 0.5,
            wolfe: WolfeParams::default(),
            armijo: ArmijoParams::default(),
            wall_clock: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |name, constraint, value| {
            Err(SolverError::InvalidParam {
                name,
                constraint,
                value,
            })
        };
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("eta", "in (0, 1)", self.eta);
        }
        if !(self.eps_dist > 0.0 && self.eps_dist < 1.0) {
            return bad("eps_dist", "in (0, 1)", self.eps_dist);
        }
        if self.max_iter == 0 {
            return bad("max_iter", "at least 1", 0.0);
        }
        if !(self.gtol >= 0.0 && self.gtol.is_finite()) {
            return bad("gtol", "nonnegative and finite", self.gtol);
        }
        if !(self.init_value > 0.0 && self.init_value < 1.0) {
            return bad("init_value", "in (0, 1)", self.init_value);
        }
        self.wolfe.validate()?;
        self.armijo.validate()?;
        Ok(())
    }
}

/// Norm of the Riemannian gradient computed from the Euclidean one.
pub fn riem_grad_norm(y: &BoxPoint, eucl_grad: &[f64]) -> f64 {
    y.values()
        .iter()
        .zip(eucl_grad)
        .map(|(&v, &g)| v * (1.0 - v) * g * g)
        .sum::<f64>()
        .sqrt()
}

/// Coarse-correction invocation test.
///
/// Fires when the restricted gradient still carries an `eta` fraction of the
/// full gradient norm and the iterate has moved at least `eps_dist` away
/// from the last point that initiated a coarse correction. Both norms zero
/// means there is nothing to optimize anywhere, which counts as "do not
/// bother".
pub fn coarse_condition(
    restricted_norm: f64,
    fine_norm: f64,
    y: &BoxPoint,
    last_initiator: Option<&BoxPoint>,
    eta: f64,
    eps_dist: f64,
) -> bool {
    if !(fine_norm > 0.0) {
        return false;
    }
    if restricted_norm < eta * fine_norm {
        return false;
    }
    match last_initiator {
        None => true,
        Some(yc) => y.euclidean_distance(yc) >= eps_dist,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Coarse surrogate for the geometric mode.
///
/// The model is anchored at the restricted iterate `x0`: its data term
/// measures divergence from the projection of `x0` rather than from any
/// measured data, so the placeholder data vector of the coarse problem is
/// never read. The correction term is linear in log-odds coordinates, which
/// makes the Riemannian gradient of the model exactly `ggrad f - kappa`.
pub struct GeometricCoarseModel<'a> {
    coarse: &'a Problem,
    x0: BoxPoint,
    theta0: Vec<f64>,
    ax0: Vec<f64>,
    tv0: f64,
    tv_grad0: Vec<f64>,
    kappa: Vec<f64>,
    anchor: f64,
    restricted_grad: Tangent,
}

impl<'a> GeometricCoarseModel<'a> {
    /// `x0` is the restriction of the fine iterate, `restricted_grad` the
    /// tangent-restricted Riemannian gradient of the fine objective.
    pub fn new(coarse: &'a Problem, x0: BoxPoint, restricted_grad: Tangent) -> Self {
        let lambda = coarse.lambda();
        let theta0: Vec<f64> = x0.values().iter().map(|&v| logit(v)).collect();
        let ax0 = coarse.matrix().mul_vec(x0.values());
        let tv0 = coarse.smoothed_tv(&x0);
        let tv_grad0 = coarse.smoothed_tv_grad(&x0);
        let kappa: Vec<f64> = x0
            .values()
            .iter()
            .zip(&tv_grad0)
            .zip(restricted_grad.values())
            .map(|((&x, &j), &t)| x * (1.0 - x) * lambda * j - t)
            .collect();
        let anchor = lambda * tv0;
        Self {
            coarse,
            x0,
            theta0,
            ax0,
            tv0,
            tv_grad0,
            kappa,
            anchor,
            restricted_grad,
        }
    }

    pub fn x0(&self) -> &BoxPoint {
        &self.x0
    }

    /// Model value at the anchor, which equals the coarse objective there.
    pub fn anchor_value(&self) -> f64 {
        self.anchor
    }

    pub fn restricted_grad(&self) -> &Tangent {
        &self.restricted_grad
    }

    pub fn psi_value(&self, x: &BoxPoint) -> f64 {
        let ax = self.coarse.matrix().mul_vec(x.values());
        let mut value = 0.0;
        for (&u, &w) in ax.iter().zip(&self.ax0) {
            value += u * (u / w).ln() + w - u;
        }
        value += self.coarse.lambda() * self.coarse.smoothed_tv(x);
        for ((&k, &xv), &t0) in self.kappa.iter().zip(x.values()).zip(&self.theta0) {
            value -= k * (logit(xv) - t0);
        }
        value
    }

    /// Model value and Riemannian gradient.
    pub fn psi(&self, x: &BoxPoint) -> (f64, Tangent) {
        let ax = self.coarse.matrix().mul_vec(x.values());
        let mut value = 0.0;
        let mut residual = vec![0.0; ax.len()];
        for (i, (&u, &w)) in ax.iter().zip(&self.ax0).enumerate() {
            let log_ratio = (u / w).ln();
            value += u * log_ratio + w - u;
            residual[i] = log_ratio;
        }
        let lambda = self.coarse.lambda();
        let mut eucl = self.coarse.matrix().mul_transpose_vec(&residual);
        let tvg = self.coarse.smoothed_tv_grad(x);
        value += lambda * self.coarse.smoothed_tv(x);
        let mut grad = Vec::with_capacity(eucl.len());
        for i in 0..eucl.len() {
            eucl[i] += lambda * tvg[i];
            let xv = x.values()[i];
            value -= self.kappa[i] * (logit(xv) - self.theta0[i]);
            grad.push(xv * (1.0 - xv) * eucl[i] - self.kappa[i]);
        }
        (value, Tangent::new(grad))
    }

    /// The certification quantity: Bregman-like gap of the coarse objective
    /// measured along the manifold connection. Nonnegative gap guarantees
    /// the prolonged correction is a fine-level descent direction.
    pub fn descent_gap(&self, x: &BoxPoint) -> f64 {
        let ax = self.coarse.matrix().mul_vec(x.values());
        let mut gap = 0.0;
        for (&u, &w) in ax.iter().zip(&self.ax0) {
            gap += u * (u / w).ln() + w - u;
        }
        let xi = exp_inv(&self.x0, x);
        let lambda = self.coarse.lambda();
        let j = self.coarse.smoothed_tv(x);
        gap + lambda * (j - self.tv0 - dot(&self.tv_grad0, xi.values()))
    }

    pub fn certify(&self, x: &BoxPoint) -> bool {
        self.descent_gap(x) >= 0.0
    }

    /// Runs up to `budget` Armijo-backtracked Riemannian gradient steps on
    /// the model, starting at the anchor. Any accepted step already makes
    /// the model value drop below the anchor, so the last iterate is
    /// returned as soon as one step succeeds; `None` reproduces the
    /// fall-back to a fine step.
    pub fn descend(&self, budget: usize, armijo: &ArmijoParams) -> Option<BoxPoint> {
        let mut x = self.x0.clone();
        let (mut value, mut grad) = self.psi(&x);
        let mut moved = false;
        for _ in 0..budget {
            let g2 = inner(&x, &grad, &grad);
            if !(g2 > 0.0) {
                break;
            }
            let d = grad.scaled(-1.0);
            let base = x.clone();
            let outcome = armijo_search(
                value,
                -g2,
                |t| self.psi_value(&exp_map(&base, &d.scaled(t))),
                armijo,
            );
            match outcome {
                ArmijoOutcome::Accepted(t) => {
                    x = exp_map(&x, &d.scaled(t));
                    let (v, g) = self.psi(&x);
                    value = v;
                    grad = g;
                    moved = true;
                }
                ArmijoOutcome::Rejected => break,
            }
        }
        moved.then_some(x)
    }
}

/// Coarse surrogate for the Euclidean mode, living on raw coarse vectors.
///
/// The restriction here is the transpose of the interpolation, so `x0` is
/// generally outside the unit box; only positivity matters, because the
/// data term evaluates the forward projection. As in the geometric model,
/// the data term is anchored at the projection of `x0` and the placeholder
/// data vector of the coarse problem is never read.
pub struct EuclideanCoarseModel<'a> {
    coarse: &'a Problem,
    x0: Vec<f64>,
    ax0: Vec<f64>,
    tv0: f64,
    tv_grad0: Vec<f64>,
    kappa: Vec<f64>,
    anchor: f64,
    restricted_grad: Vec<f64>,
}

impl<'a> EuclideanCoarseModel<'a> {
    /// `x0` is the transposed-interpolation restriction of the fine iterate
    /// (componentwise positive), `restricted_grad` the same restriction of
    /// the fine Euclidean gradient.
    pub fn new(coarse: &'a Problem, x0: Vec<f64>, restricted_grad: Vec<f64>) -> Self {
        debug_assert!(x0.iter().all(|&v| v > 0.0));
        let lambda = coarse.lambda();
        let shape = coarse.image_shape();
        let ax0 = coarse.matrix().mul_vec(&x0);
        let tv0 = objective::tv_value(shape, coarse.rho(), &x0);
        let tv_grad0 = objective::tv_grad(shape, coarse.rho(), &x0);
        let kappa: Vec<f64> = tv_grad0
            .iter()
            .zip(&restricted_grad)
            .map(|(&j, &r)| lambda * j - r)
            .collect();
        let anchor = lambda * tv0;
        Self {
            coarse,
            x0,
            ax0,
            tv0,
            tv_grad0,
            kappa,
            anchor,
            restricted_grad,
        }
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn anchor_value(&self) -> f64 {
        self.anchor
    }

    pub fn restricted_grad(&self) -> &[f64] {
        &self.restricted_grad
    }

    /// Model value; `x` must be componentwise positive.
    pub fn psi_value(&self, x: &[f64]) -> f64 {
        let ax = self.coarse.matrix().mul_vec(x);
        let mut value = 0.0;
        for (&u, &w) in ax.iter().zip(&self.ax0) {
            debug_assert!(u > 0.0);
            value += u * (u / w).ln() + w - u;
        }
        value += self.coarse.lambda()
            * objective::tv_value(self.coarse.image_shape(), self.coarse.rho(), x);
        for ((&k, &xv), &x0v) in self.kappa.iter().zip(x).zip(&self.x0) {
            value -= k * (xv - x0v);
        }
        value
    }

    /// Model value and Euclidean gradient.
    pub fn psi(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let ax = self.coarse.matrix().mul_vec(x);
        let mut value = 0.0;
        let mut residual = vec![0.0; ax.len()];
        for (i, (&u, &w)) in ax.iter().zip(&self.ax0).enumerate() {
            let log_ratio = (u / w).ln();
            value += u * log_ratio + w - u;
            residual[i] = log_ratio;
        }
        let lambda = self.coarse.lambda();
        let shape = self.coarse.image_shape();
        let mut grad = self.coarse.matrix().mul_transpose_vec(&residual);
        let tvg = objective::tv_grad(shape, self.coarse.rho(), x);
        value += lambda * objective::tv_value(shape, self.coarse.rho(), x);
        for i in 0..grad.len() {
            grad[i] += lambda * tvg[i] - self.kappa[i];
            value -= self.kappa[i] * (x[i] - self.x0[i]);
        }
        (value, grad)
    }

    /// The same model written as Bregman divergence plus linear term plus
    /// anchor. Kept separate so tests can confirm both forms agree.
    pub fn psi_bregman_form(&self, x: &[f64]) -> f64 {
        let ax = self.coarse.matrix().mul_vec(x);
        let mut breg = 0.0;
        for (&u, &w) in ax.iter().zip(&self.ax0) {
            breg += u * (u / w).ln() + w - u;
        }
        let lambda = self.coarse.lambda();
        let j = objective::tv_value(self.coarse.image_shape(), self.coarse.rho(), x);
        let mut linear_j = 0.0;
        let mut linear_fine = 0.0;
        for i in 0..x.len() {
            let dx = x[i] - self.x0[i];
            linear_j += self.tv_grad0[i] * dx;
            linear_fine += self.restricted_grad[i] * dx;
        }
        breg + lambda * (j - self.tv0 - linear_j) + linear_fine + self.anchor
    }

    /// Armijo descent on the model from `x0`, with trial steps capped at
    /// 0.99 of the largest positivity-preserving step.
    pub fn descend(&self, budget: usize, armijo: &ArmijoParams) -> Option<Vec<f64>> {
        let mut x = self.x0.clone();
        let (mut value, mut grad) = self.psi(&x);
        let mut moved = false;
        for _ in 0..budget {
            let g2 = dot(&grad, &grad);
            if !(g2 > 0.0) {
                break;
            }
            let mut cap = f64::INFINITY;
            for (&xi, &gi) in x.iter().zip(&grad) {
                if gi > 0.0 {
                    cap = cap.min(xi / gi);
                }
            }
            let start = armijo.alpha0.min(0.99 * cap);
            if !(start >= MIN_STEP) {
                break;
            }
            let params = ArmijoParams {
                alpha0: start,
                ..armijo.clone()
            };
            let base = x.clone();
            let gc = grad.clone();
            let outcome = armijo_search(
                value,
                -g2,
                |t| {
                    let trial: Vec<f64> =
                        base.iter().zip(&gc).map(|(&xi, &gi)| xi - t * gi).collect();
                    self.psi_value(&trial)
                },
                &params,
            );
            match outcome {
                ArmijoOutcome::Accepted(t) => {
                    for (xi, &gi) in x.iter_mut().zip(&gc) {
                        *xi -= t * gi;
                    }
                    let (v, g) = self.psi(&x);
                    value = v;
                    grad = g;
                    moved = true;
                }
                ArmijoOutcome::Rejected => break,
            }
        }
        moved.then_some(x)
    }
}

/// Geodesic line probe: evaluates the fine objective along
/// `alpha -> exp_map(y0, alpha * d)` and caches every probed point so the
/// accepted one is reused without a second evaluation.
struct LineProbe<'a> {
    pb: &'a Problem,
    evals: &'a mut usize,
    y0: &'a BoxPoint,
    d: &'a Tangent,
    f0: f64,
    dphi0: f64,
    cache: Vec<(f64, f64, f64, BoxPoint, ObjectiveEval)>,
}

impl LineProbe<'_> {
    fn eval(&mut self, alpha: f64) -> (f64, f64) {
        if alpha == 0.0 {
            return (self.f0, self.dphi0);
        }
        if let Some(&(_, v, s, ..)) = self.cache.iter().find(|&&(a, ..)| a == alpha) {
            return (v, s);
        }
        let y = exp_map(self.y0, &self.d.scaled(alpha));
        *self.evals += 1;
        let ev = self.pb.objective(&y);
        // Chain rule along the geodesic: the direction transported to the
        // trial point is d * y_a(1-y_a)/(y0(1-y0)).
        let mut slope = 0.0;
        for i in 0..y.len() {
            let ya = y.values()[i];
            let y0 = self.y0.values()[i];
            slope += ev.eucl_grad[i] * ya * (1.0 - ya) * self.d.values()[i] / (y0 * (1.0 - y0));
        }
        let value = ev.value;
        self.cache.push((alpha, value, slope, y, ev));
        (value, slope)
    }

    fn take(self, alpha: f64) -> Option<(BoxPoint, ObjectiveEval)> {
        let pb = self.pb;
        let evals = self.evals;
        let y0 = self.y0;
        let d = self.d;
        match self
            .cache
            .into_iter()
            .find(|&(a, ..)| a == alpha)
            .map(|(_, _, _, y, ev)| (y, ev))
        {
            Some(hit) => Some(hit),
            None => {
                // Every alpha a search returns was probed, so this is dead
                // in practice; evaluate honestly if it ever fires.
                let y = exp_map(y0, &d.scaled(alpha));
                *evals += 1;
                let ev = pb.objective(&y);
                Some((y, ev))
            }
        }
    }
}

/// One fine-level line search along direction `d` from `y0`: approximate
/// Wolfe first, plain backtracking as the fallback. `None` means neither
/// search found an acceptable step.
fn step_along(
    pb: &Problem,
    evals: &mut usize,
    y0: &BoxPoint,
    ev0: &ObjectiveEval,
    d: &Tangent,
    dphi0: f64,
    wolfe: &WolfeParams,
    armijo: &ArmijoParams,
) -> Option<(BoxPoint, ObjectiveEval)> {
    if !(dphi0 < 0.0) {
        return None;
    }
    let mut probe = LineProbe {
        pb,
        evals,
        y0,
        d,
        f0: ev0.value,
        dphi0,
        cache: Vec::new(),
    };
    let alpha = match hz_search(|a| probe.eval(a), wolfe) {
        Ok(a) => Some(a),
        Err(_) => match armijo_search(ev0.value, dphi0, |a| probe.eval(a).0, armijo) {
            ArmijoOutcome::Accepted(a) => Some(a),
            ArmijoOutcome::Rejected => None,
        },
    }?;
    probe.take(alpha)
}

enum PgStep {
    Moved(BoxPoint, ObjectiveEval),
    /// The projected move was zero at the first trial step: the iterate is
    /// stationary for the projected dynamics.
    Stationary,
    Stalled,
}

/// Projected-gradient step: `y(alpha) = clip(y - alpha * grad)` with a
/// backtracking test against the projected decrease
/// `f(y(alpha)) <= f(y) + sigma * <grad, y(alpha) - y>`.
fn pg_step(
    pb: &Problem,
    evals: &mut usize,
    y0: &BoxPoint,
    ev0: &ObjectiveEval,
    armijo: &ArmijoParams,
) -> PgStep {
    let g = &ev0.eucl_grad;
    let mut alpha = armijo.alpha0;
    let mut first = true;
    while alpha >= MIN_STEP {
        let trial: Vec<f64> = y0
            .values()
            .iter()
            .zip(g)
            .map(|(&y, &gi)| y - alpha * gi)
            .collect();
        let y_trial = BoxPoint::new(trial).expect("finite step from finite gradient");
        if y_trial.values() == y0.values() {
            return if first {
                PgStep::Stationary
            } else {
                PgStep::Stalled
            };
        }
        *evals += 1;
        let ev = pb.objective(&y_trial);
        let moved: f64 = g
            .iter()
            .zip(y_trial.values().iter().zip(y0.values()))
            .map(|(&gi, (&yt, &yo))| gi * (yt - yo))
            .sum();
        if ev.value <= ev0.value + armijo.sigma * moved {
            return PgStep::Moved(y_trial, ev);
        }
        alpha *= armijo.beta;
        first = false;
    }
    PgStep::Stalled
}

/// Fine-level update along a prolonged Euclidean correction `d`: plain
/// backtracking on `f(clip(y0 + alpha d))`, with `alpha` first capped at
/// 0.99 of the largest step keeping `y0 + alpha d` inside the box.
fn euclidean_correction_step(
    pb: &Problem,
    evals: &mut usize,
    y0: &BoxPoint,
    ev0: &ObjectiveEval,
    d: &[f64],
    armijo: &ArmijoParams,
) -> Option<(BoxPoint, ObjectiveEval)> {
    let dphi0 = dot(&ev0.eucl_grad, d);
    if !(dphi0 < 0.0) {
        return None;
    }
    let mut cap = f64::INFINITY;
    for (&yi, &di) in y0.values().iter().zip(d) {
        if di > 0.0 {
            cap = cap.min((1.0 - yi) / di);
        } else if di < 0.0 {
            cap = cap.min(yi / -di);
        }
    }
    let start = armijo.alpha0.min(0.99 * cap);
    if !(start >= MIN_STEP) {
        return None;
    }
    let params = ArmijoParams {
        alpha0: start,
        ..armijo.clone()
    };
    let mut cache: Vec<(f64, BoxPoint, ObjectiveEval)> = Vec::new();
    let outcome = armijo_search(
        ev0.value,
        dphi0,
        |a| {
            let trial: Vec<f64> = y0
                .values()
                .iter()
                .zip(d)
                .map(|(&y, &di)| y + a * di)
                .collect();
            let yt = BoxPoint::new(trial).expect("finite correction");
            *evals += 1;
            let ev = pb.objective(&yt);
            let value = ev.value;
            cache.push((a, yt, ev));
            value
        },
        &params,
    );
    match outcome {
        ArmijoOutcome::Accepted(a) => cache
            .into_iter()
            .find(|&(aa, ..)| aa == a)
            .map(|(_, y, ev)| (y, ev)),
        ArmijoOutcome::Rejected => None,
    }
}

struct RunState<'a> {
    cfg: &'a SolverConfig,
    started: Instant,
    evals: usize,
    y: BoxPoint,
    ev: ObjectiveEval,
    gnorm: f64,
    records: Vec<IterateRecord>,
    status: RunStatus,
}

impl<'a> RunState<'a> {
    fn init(pb: &Problem, cfg: &'a SolverConfig) -> Self {
        let started = Instant::now();
        let y = BoxPoint::constant(pb.dim(), cfg.init_value)
            .expect("validated init value, nonempty problem");
        let ev = pb.objective(&y);
        let gnorm = riem_grad_norm(&y, &ev.eucl_grad);
        let mut st = RunState {
            cfg,
            started,
            evals: 1,
            y,
            ev,
            gnorm,
            records: Vec::with_capacity(cfg.max_iter + 1),
            status: RunStatus::MaxIterations,
        };
        st.record(0, Level::Fine);
        st
    }

    fn seconds(&self) -> f64 {
        if self.cfg.wall_clock {
            self.started.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }

    fn record(&mut self, iter: usize, level: Level) {
        self.records.push(IterateRecord {
            iter,
            level,
            f: self.ev.value,
            gnorm: self.gnorm,
            fine_grad_evals: self.evals,
            seconds: self.seconds(),
        });
    }

    fn accept(&mut self, y: BoxPoint, ev: ObjectiveEval) {
        self.gnorm = riem_grad_norm(&y, &ev.eucl_grad);
        self.y = y;
        self.ev = ev;
    }

    fn finish(self, mode: SolverMode) -> RunTrace {
        RunTrace {
            problem: String::new(),
            mode: mode.name().to_string(),
            status: self.status,
            records: self.records,
        }
    }
}

/// Riemannian gradient descent on the fine grid.
pub fn run_single_level(pb: &Problem, cfg: &SolverConfig) -> Result<RunTrace, SolverError> {
    cfg.validate()?;
    let mut st = RunState::init(pb, cfg);
    for iter in 1..=cfg.max_iter {
        if st.gnorm <= cfg.gtol {
            st.status = RunStatus::Converged;
            break;
        }
        let rg = riem_grad(&st.y, &st.ev.eucl_grad);
        let dphi0 = -inner(&st.y, &rg, &rg);
        let d = rg.scaled(-1.0);
        match step_along(
            pb,
            &mut st.evals,
            &st.y,
            &st.ev,
            &d,
            dphi0,
            &cfg.wolfe,
            &cfg.armijo,
        ) {
            Some((y, ev)) => {
                st.accept(y, ev);
                st.record(iter, Level::Fine);
            }
            None => {
                st.status = RunStatus::Stalled;
                break;
            }
        }
    }
    Ok(st.finish(SolverMode::SingleRg))
}

/// Projected-gradient baseline on the clipped box.
pub fn run_projected_gradient(pb: &Problem, cfg: &SolverConfig) -> Result<RunTrace, SolverError> {
    cfg.validate()?;
    let mut st = RunState::init(pb, cfg);
    for iter in 1..=cfg.max_iter {
        if st.gnorm <= cfg.gtol {
            st.status = RunStatus::Converged;
            break;
        }
        match pg_step(pb, &mut st.evals, &st.y, &st.ev, &cfg.armijo) {
            PgStep::Moved(y, ev) => {
                st.accept(y, ev);
                st.record(iter, Level::Fine);
            }
            PgStep::Stationary => {
                st.status = RunStatus::Converged;
                break;
            }
            PgStep::Stalled => {
                st.status = RunStatus::Stalled;
                break;
            }
        }
    }
    Ok(st.finish(SolverMode::SinglePg))
}

/// Two-level scheme with the geometric coarse model: qualifying iterates
/// build the model, minimize it a few steps, certify the candidate, and
/// line-search the fine objective along the prolonged correction. Anything
/// that fails along the way falls back to a plain fine step.
pub fn run_two_level_geometric(
    pb: &Problem,
    h: &GridHierarchy,
    cfg: &SolverConfig,
) -> Result<RunTrace, SolverError> {
    cfg.validate()?;
    let coarse_pb = pb.coarsen(h)?;
    let mut st = RunState::init(pb, cfg);
    let mut last_initiator: Option<BoxPoint> = None;
    for iter in 1..=cfg.max_iter {
        if st.gnorm <= cfg.gtol {
            st.status = RunStatus::Converged;
            break;
        }
        let rg = riem_grad(&st.y, &st.ev.eucl_grad);
        let mut stepped: Option<(BoxPoint, ObjectiveEval, Level)> = None;

        let x0 = h.restrict(&st.y);
        let trg = h.restrict_tangent(&st.y, &rg);
        let restricted_norm = inner(&x0, &trg, &trg).sqrt();
        if coarse_condition(
            restricted_norm,
            st.gnorm,
            &st.y,
            last_initiator.as_ref(),
            cfg.eta,
            cfg.eps_dist,
        ) {
            last_initiator = Some(st.y.clone());
            let model = GeometricCoarseModel::new(&coarse_pb, x0, trg);
            if let Some(candidate) = model.descend(cfg.coarse_iters, &cfg.armijo) {
                if model.certify(&candidate) {
                    let xi = exp_inv(model.x0(), &candidate);
                    let d = h.dprolong(model.x0(), &xi);
                    let dphi0 = dot(&st.ev.eucl_grad, d.values());
                    stepped = step_along(
                        pb,
                        &mut st.evals,
                        &st.y,
                        &st.ev,
                        &d,
                        dphi0,
                        &cfg.wolfe,
                        &cfg.armijo,
                    )
                    .map(|(y, ev)| (y, ev, Level::Coarse));
                }
            }
        }

        if stepped.is_none() {
            let dphi0 = -inner(&st.y, &rg, &rg);
            let d = rg.scaled(-1.0);
            stepped = step_along(
                pb,
                &mut st.evals,
                &st.y,
                &st.ev,
                &d,
                dphi0,
                &cfg.wolfe,
                &cfg.armijo,
            )
            .map(|(y, ev)| (y, ev, Level::Fine));
        }

        match stepped {
            Some((y, ev, level)) => {
                st.accept(y, ev);
                st.record(iter, level);
            }
            None => {
                st.status = RunStatus::Stalled;
                break;
            }
        }
    }
    Ok(st.finish(SolverMode::TwoLevelRg))
}

/// Two-level scheme in flat coordinates: projected-gradient fine steps plus
/// Euclidean coarse corrections through the linear interpolation pair.
pub fn run_two_level_euclidean(
    pb: &Problem,
    h: &GridHierarchy,
    cfg: &SolverConfig,
) -> Result<RunTrace, SolverError> {
    cfg.validate()?;
    let coarse_pb = pb.coarsen(h)?;
    let mut st = RunState::init(pb, cfg);
    let mut last_initiator: Option<BoxPoint> = None;
    for iter in 1..=cfg.max_iter {
        if st.gnorm <= cfg.gtol {
            st.status = RunStatus::Converged;
            break;
        }
        let mut stepped: Option<(BoxPoint, ObjectiveEval, Level)> = None;

        let restricted = h.interp_transpose(&st.ev.eucl_grad);
        let restricted_norm = dot(&restricted, &restricted).sqrt();
        let fine_norm = dot(&st.ev.eucl_grad, &st.ev.eucl_grad).sqrt();
        if coarse_condition(
            restricted_norm,
            fine_norm,
            &st.y,
            last_initiator.as_ref(),
            cfg.eta,
            cfg.eps_dist,
        ) {
            last_initiator = Some(st.y.clone());
            let x0 = h.interp_transpose(st.y.values());
            let model = EuclideanCoarseModel::new(&coarse_pb, x0, restricted);
            if let Some(candidate) = model.descend(cfg.coarse_iters, &cfg.armijo) {
                let delta: Vec<f64> = candidate
                    .iter()
                    .zip(model.x0())
                    .map(|(&c, &x)| c - x)
                    .collect();
                let d = h.interp_apply(&delta);
                stepped =
                    euclidean_correction_step(pb, &mut st.evals, &st.y, &st.ev, &d, &cfg.armijo)
                        .map(|(y, ev)| (y, ev, Level::Coarse));
            }
        }

        if stepped.is_none() {
            match pg_step(pb, &mut st.evals, &st.y, &st.ev, &cfg.armijo) {
                PgStep::Moved(y, ev) => stepped = Some((y, ev, Level::Fine)),
                PgStep::Stationary => {
                    st.status = RunStatus::Converged;
                    break;
                }
                PgStep::Stalled => {
                    st.status = RunStatus::Stalled;
                    break;
                }
            }
        }

        match stepped {
            Some((y, ev, level)) => {
                st.accept(y, ev);
                st.record(iter, level);
            }
            None => {
                st.status = RunStatus::Stalled;
                break;
            }
        }
    }
    Ok(st.finish(SolverMode::TwoLevelEuclidean))
}

/// Dispatches on `cfg.mode`, building the grid hierarchy for the two-level
/// modes from the problem's image shape.
pub fn run_solver(pb: &Problem, cfg: &SolverConfig) -> Result<RunTrace, SolverError> {
    match cfg.mode {
        SolverMode::SingleRg => run_single_level(pb, cfg),
        SolverMode::SinglePg => run_projected_gradient(pb, cfg),
        SolverMode::TwoLevelRg => {
            let h = GridHierarchy::bilinear(pb.image_shape())?;
            run_two_level_geometric(pb, &h, cfg)
        }
        SolverMode::TwoLevelEuclidean => {
            let h = GridHierarchy::bilinear(pb.image_shape())?;
            run_two_level_euclidean(pb, &h, cfg)
        }
    }
}
