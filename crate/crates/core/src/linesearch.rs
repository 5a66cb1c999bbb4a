//! Scalar line searches.
//!
//! [`hz_search`] finds a step satisfying the approximate Wolfe conditions
//!
//! ```text
//! sigma*phi'(0) <= phi'(a) <= (2*delta - 1)*phi'(0),   phi(a) <= phi(0) + eps
//! ```
//!
//! using bracketing, secant-squared interval updates and a guarded
//! bisection. Evaluations are memoized by exact argument, so re-testing a
//! candidate is free and the budget counts distinct trial points. The
//! plain backtracking [`armijo_search`] is kept for coarse-level steps,
//! where a cheap monotone decrease is all that is needed.

use thiserror::Error;

/// Steps below this are treated as numerically zero and rejected.
pub const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum LineSearchError {
    #[error("parameter {name} = {value} is out of range")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("not a descent direction: phi'(0) = {slope}")]
    NotDescent { slope: f64 },
    #[error("evaluation budget exhausted after {evals} evaluations; best feasible step {best}")]
    BudgetExhausted { evals: usize, best: f64 },
    #[error("search interval collapsed; best feasible step {best}")]
    IntervalCollapse { best: f64 },
}

/// Parameters of the approximate Wolfe search.
///
/// `eps` is relative: the acceptance threshold on values is
/// `phi(0) + eps*(1 + |phi(0)|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WolfeParams {
    pub delta: f64,
    pub sigma: f64,
    pub eps: f64,
    pub gamma: f64,
    pub rho: f64,
    pub c_init: f64,
    pub max_evals: usize,
}

impl Default for WolfeParams {
    fn default() -> Self {
        Self {
            delta: 0.1,
            sigma: 0.9,
            eps: 1e-6,
            gamma: 0.66,
            rho: 5.0,
            c_init: 1.0,
            max_evals: 50,
        }
    }
}

impl WolfeParams {
    pub fn validate(&self) -> Result<(), LineSearchError> {
        let bad = |name, value| Err(LineSearchError::InvalidParam { name, value });
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return bad("delta", self.delta);
        }
        if !(self.sigma >= self.delta && self.sigma < 1.0) {
            return bad("sigma", self.sigma);
        }
        if !(self.eps >= 0.0) {
            return bad("eps", self.eps);
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma", self.gamma);
        }
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return bad("rho", self.rho);
        }
        if !(self.c_init > 0.0 && self.c_init.is_finite()) {
            return bad("c_init", self.c_init);
        }
        if self.max_evals < 2 {
            return bad("max_evals", self.max_evals as f64);
        }
        Ok(())
    }
}

/// Parameters of the backtracking search.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmijoParams {
    pub sigma: f64,
    pub beta: f64,
    pub alpha0: f64,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            sigma: 1e-4,
            beta: 0.6,
            alpha0: 1.0 / 0.6,
        }
    }
}

impl ArmijoParams {
    pub fn validate(&self) -> Result<(), LineSearchError> {
        let bad = |name, value| Err(LineSearchError::InvalidParam { name, value });
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return bad("armijo_sigma", self.sigma);
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("armijo_beta", self.beta);
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad("armijo_alpha0", self.alpha0);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmijoOutcome {
    Accepted(f64),
    /// No trial step of at least [`MIN_STEP`] gave sufficient decrease.
    Rejected,
}

/// Backtracking search: the largest step in `{alpha0 * beta^k}` with
/// `phi(a) <= phi(0) + sigma*a*phi'(0)`. Requires `dphi0 < 0`.
pub fn armijo_search(
    phi0: f64,
    dphi0: f64,
    mut phi: impl FnMut(f64) -> f64,
    p: &ArmijoParams,
) -> ArmijoOutcome {
    debug_assert!(dphi0 < 0.0, "armijo needs a descent direction");
    let mut alpha = p.alpha0;
    while alpha >= MIN_STEP {
        if phi(alpha) <= phi0 + p.sigma * alpha * dphi0 {
            return ArmijoOutcome::Accepted(alpha);
        }
        alpha *= p.beta;
    }
    ArmijoOutcome::Rejected
}

/// Memoized, budget-limited probe of the line function.
struct Probe<'f> {
    f: &'f mut dyn FnMut(f64) -> (f64, f64),
    memo: Vec<(f64, f64, f64)>,
    evals: usize,
    max_evals: usize,
}

#[derive(Debug)]
struct Exhausted;

impl<'f> Probe<'f> {
    fn new(f: &'f mut dyn FnMut(f64) -> (f64, f64), max_evals: usize) -> Self {
        Self {
            f,
            memo: Vec::with_capacity(max_evals.min(64)),
            evals: 0,
            max_evals,
        }
    }

    fn eval(&mut self, alpha: f64) -> Result<(f64, f64), Exhausted> {
        if let Some(&(_, p, d)) = self.memo.iter().find(|&&(a, _, _)| a == alpha) {
            return Ok((p, d));
        }
        if self.evals >= self.max_evals {
            return Err(Exhausted);
        }
        self.evals += 1;
        let (p, d) = (self.f)(alpha);
        self.memo.push((alpha, p, d));
        Ok((p, d))
    }

    /// Lowest evaluated value at a positive step under the threshold;
    /// falls back to 0 when nothing qualifies.
    fn best(&self, threshold: f64) -> f64 {
        self.memo
            .iter()
            .filter(|&&(a, p, _)| a > 0.0 && p <= threshold)
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map_or(0.0, |&(a, _, _)| a)
    }
}

struct HzCtx<'p> {
    phi0: f64,
    dphi0: f64,
    eps: f64,
    p: &'p WolfeParams,
}

impl HzCtx<'_> {
    fn high(&self) -> f64 {
        self.phi0 + self.eps
    }

    fn satisfies(&self, phi_c: f64, dphi_c: f64) -> bool {
        phi_c <= self.high()
            && self.p.sigma * self.dphi0 <= dphi_c
            && dphi_c <= (2.0 * self.p.delta - 1.0) * self.dphi0
    }

    fn exhausted(&self, probe: &Probe) -> LineSearchError {
        LineSearchError::BudgetExhausted {
            evals: probe.evals,
            best: probe.best(self.high()),
        }
    }

    fn collapse(&self, probe: &Probe) -> LineSearchError {
        LineSearchError::IntervalCollapse {
            best: probe.best(self.high()),
        }
    }
}

/// Secant step through `(a, phi'(a))` and `(b, phi'(b))`; falls back to the
/// midpoint when the slopes coincide or the step leaves the interval badly.
fn secant_point(a: f64, da: f64, b: f64, db: f64) -> f64 {
    let denom = db - da;
    if denom == 0.0 {
        return 0.5 * (a + b);
    }
    let c = (a * db - b * da) / denom;
    if c.is_finite() {
        c
    } else {
        0.5 * (a + b)
    }
}

/// Bisection refinement used when a trial point has negative slope but
/// value above the threshold: shrink toward a low endpoint until the slope
/// turns nonnegative.
fn bisect_high(
    probe: &mut Probe,
    ctx: &HzCtx,
    mut lo: f64,
    mut hi: f64,
) -> Result<(f64, f64), LineSearchError> {
    loop {
        let d = 0.5 * (lo + hi);
        if d <= lo || d >= hi {
            return Err(ctx.collapse(probe));
        }
        let (pd, dd) = probe.eval(d).map_err(|_| ctx.exhausted(probe))?;
        if dd >= 0.0 {
            return Ok((lo, d));
        }
        if pd <= ctx.high() {
            lo = d;
        } else {
            hi = d;
        }
    }
}

fn update_inner(
    probe: &mut Probe,
    ctx: &HzCtx,
    a: f64,
    b: f64,
    c: f64,
) -> Result<(f64, f64), LineSearchError> {
    if !(c > a && c < b) {
        return Ok((a, b));
    }
    let (pc, dc) = probe.eval(c).map_err(|_| ctx.exhausted(probe))?;
    if dc >= 0.0 {
        return Ok((a, c));
    }
    if pc <= ctx.high() {
        return Ok((c, b));
    }
    bisect_high(probe, ctx, a, c)
}

fn bracket_inner(
    probe: &mut Probe,
    ctx: &HzCtx,
    c: f64,
) -> Result<(f64, f64), LineSearchError> {
    // prev_ok is the last expansion point that passed both tests; the
    // virtual predecessor of the first probe is 0.
    let mut prev_ok = 0.0;
    let mut ck = c;
    loop {
        let (pk, dk) = probe.eval(ck).map_err(|_| ctx.exhausted(probe))?;
        if dk >= 0.0 {
            return Ok((prev_ok, ck));
        }
        if pk > ctx.high() {
            return bisect_high(probe, ctx, 0.0, ck);
        }
        prev_ok = ck;
        ck *= ctx.p.rho;
        if !ck.is_finite() {
            return Err(ctx.exhausted(probe));
        }
    }
}

fn secant2_inner(
    probe: &mut Probe,
    ctx: &HzCtx,
    a: f64,
    b: f64,
) -> Result<(f64, f64), LineSearchError> {
    let (_, da) = probe.eval(a).map_err(|_| ctx.exhausted(probe))?;
    let (_, db) = probe.eval(b).map_err(|_| ctx.exhausted(probe))?;
    let c = secant_point(a, da, b, db);
    let (big_a, big_b) = update_inner(probe, ctx, a, b, c)?;
    let cbar = if c == big_b {
        let (_, d_new) = probe.eval(big_b).map_err(|_| ctx.exhausted(probe))?;
        Some(secant_point(b, db, big_b, d_new))
    } else if c == big_a {
        let (_, d_new) = probe.eval(big_a).map_err(|_| ctx.exhausted(probe))?;
        Some(secant_point(a, da, big_a, d_new))
    } else {
        None
    };
    match cbar {
        Some(cbar) => update_inner(probe, ctx, big_a, big_b, cbar),
        None => Ok((big_a, big_b)),
    }
}

/// Approximate Wolfe search along `f: alpha -> (phi(alpha), phi'(alpha))`.
///
/// Brackets from `c_init` by `rho`-expansion, then alternates secant-squared
/// steps with a bisection safeguard whenever the interval shrinks by less
/// than `gamma`. When the bisection branch is skipped, the trial step is the
/// right end of the current interval.
pub fn hz_search(
    mut f: impl FnMut(f64) -> (f64, f64),
    p: &WolfeParams,
) -> Result<f64, LineSearchError> {
    p.validate()?;
    let mut fdyn: &mut dyn FnMut(f64) -> (f64, f64) = &mut f;
    let mut probe = Probe::new(&mut fdyn, p.max_evals);
    let (phi0, dphi0) = probe.eval(0.0).expect("budget is at least 2");
    if !(dphi0 < 0.0) {
        return Err(LineSearchError::NotDescent { slope: dphi0 });
    }
    let ctx = HzCtx {
        phi0,
        dphi0,
        eps: p.eps * (1.0 + phi0.abs()),
        p,
    };
    let mut cand = p.c_init;
    let (mut a, mut b) = bracket_inner(&mut probe, &ctx, cand)?;
    // Each outer pass either returns, consumes budget, or hits the
    // iteration cap; the cap guards against fully-memoized stagnation.
    for _ in 0..2 * p.max_evals {
        let (pc, dc) = probe.eval(cand).map_err(|_| ctx.exhausted(&probe))?;
        if ctx.satisfies(pc, dc) {
            return Ok(cand);
        }
        let (a2, b2) = secant2_inner(&mut probe, &ctx, a, b)?;
        if b2 - a2 > ctx.p.gamma * (b - a) {
            cand = 0.5 * (a2 + b2);
            let (a3, b3) = update_inner(&mut probe, &ctx, a2, b2, cand)?;
            a = a3;
            b = b3;
        } else {
            a = a2;
            b = b2;
            cand = b;
        }
    }
    Err(ctx.exhausted(&probe))
}

/// Standalone bracketing phase, exposed for testing and reuse: returns an
/// interval `[a, b]` with `phi(a) <= phi(0)+eps`, `phi'(a) < 0 <= phi'(b)`.
pub fn bracket(
    mut f: impl FnMut(f64) -> (f64, f64),
    p: &WolfeParams,
    c: f64,
) -> Result<(f64, f64), LineSearchError> {
    p.validate()?;
    let mut fdyn: &mut dyn FnMut(f64) -> (f64, f64) = &mut f;
    let mut probe = Probe::new(&mut fdyn, p.max_evals);
    let (phi0, dphi0) = probe.eval(0.0).expect("budget is at least 2");
    if !(dphi0 < 0.0) {
        return Err(LineSearchError::NotDescent { slope: dphi0 });
    }
    let ctx = HzCtx {
        phi0,
        dphi0,
        eps: p.eps * (1.0 + phi0.abs()),
        p,
    };
    bracket_inner(&mut probe, &ctx, c)
}

/// Standalone interval update: narrows `[a, b]` using the trial point `c`,
/// preserving the bracketing invariants.
pub fn update(
    mut f: impl FnMut(f64) -> (f64, f64),
    p: &WolfeParams,
    a: f64,
    b: f64,
    c: f64,
) -> Result<(f64, f64), LineSearchError> {
    p.validate()?;
    let mut fdyn: &mut dyn FnMut(f64) -> (f64, f64) = &mut f;
    let mut probe = Probe::new(&mut fdyn, p.max_evals);
    let (phi0, dphi0) = probe.eval(0.0).expect("budget is at least 2");
    let ctx = HzCtx {
        phi0,
        dphi0,
        eps: p.eps * (1.0 + phi0.abs()),
        p,
    };
    update_inner(&mut probe, &ctx, a, b, c)
}

/// Standalone double-secant step on a bracketing interval.
pub fn secant2(
    mut f: impl FnMut(f64) -> (f64, f64),
    p: &WolfeParams,
    a: f64,
    b: f64,
) -> Result<(f64, f64), LineSearchError> {
    p.validate()?;
    let mut fdyn: &mut dyn FnMut(f64) -> (f64, f64) = &mut f;
    let mut probe = Probe::new(&mut fdyn, p.max_evals);
    let (phi0, dphi0) = probe.eval(0.0).expect("budget is at least 2");
    let ctx = HzCtx {
        phi0,
        dphi0,
        eps: p.eps * (1.0 + phi0.abs()),
        p,
    };
    secant2_inner(&mut probe, &ctx, a, b)
}
