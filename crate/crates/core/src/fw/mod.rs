//! Domain-agnostic Frank-Wolfe solver.
//!
//! Each iteration linearizes the objective at `x`, asks the domain for an
//! (approximate) minimizer `s` of that linear function, and moves to
//! `(1 - alpha) x + alpha s`. The same oracle call yields the duality gap
//! `<x - s, grad f(x)>`, which upper-bounds `f(x) - f*` and is what the
//! certified runs stop on.

mod ledger;
mod line_search;
mod randomized;
mod trace;

use std::time::Instant;

pub use ledger::{IterateLedger, PRUNE_BELOW};
pub use line_search::line_search_alpha;
pub use randomized::{fw_run_randomized, randomized_lmo, Sampler};
pub use trace::{RunTrace, TraceRow, CSV_HEADER};

use crate::error::{ensure_finite, FwError, Result};
use crate::rng::{self, FwRng};

/// What the solver asks of a linear minimization oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmoRequest {
    /// Iteration counter of the calling solver.
    pub k: usize,
    /// Allowed additive error on `<s, grad>`; zero asks for an exact answer.
    pub tolerance: f64,
}

impl LmoRequest {
    pub fn exact(k: usize) -> Self {
        Self { k, tolerance: 0.0 }
    }
}

/// Oracle answer: the atom, its linear value, and a bound on how far that
/// value may sit above the true minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMin<A> {
    pub atom: A,
    pub value: f64,
    pub slack: f64,
    pub matvecs: u64,
}

impl<A> LinearMin<A> {
    pub fn exact(atom: A, value: f64) -> Self {
        Self { atom, value, slack: 0.0, matvecs: 0 }
    }
}

/// Compact convex set given through its linear minimization oracle.
pub trait Domain: Sync {
    type Point: Clone;
    type Grad;
    type Atom: Clone + std::fmt::Debug;

    fn lmo(&self, grad: &Self::Grad, req: &LmoRequest, rng: &mut FwRng) -> Result<LinearMin<Self::Atom>>;

    /// `<x, grad>`
    fn inner(&self, x: &Self::Point, grad: &Self::Grad) -> f64;

    /// `<s, grad>` for the point represented by `atom`.
    fn atom_value(&self, atom: &Self::Atom, grad: &Self::Grad) -> f64;

    fn atom_point(&self, atom: &Self::Atom) -> Self::Point;

    /// `x <- (1 - alpha) x + alpha s`
    fn blend(&self, x: &mut Self::Point, alpha: f64, atom: &Self::Atom);

    fn describe(&self, atom: &Self::Atom) -> String;

    fn contains(&self, x: &Self::Point) -> bool;

    fn max_abs_diff(&self, a: &Self::Point, b: &Self::Point) -> f64;

    /// Non-atom start point, where the domain has one.
    fn origin(&self) -> Option<Self::Point> {
        None
    }

    /// Whether two atoms are the same point, so the ledger can merge them.
    fn same_atom(&self, _a: &Self::Atom, _b: &Self::Atom) -> bool {
        false
    }
}

/// Convex objective with first-order oracle.
pub trait Objective<P, G>: Sync {
    fn value(&self, x: &P) -> f64;

    fn gradient(&self, x: &P) -> G;

    /// Upper bound on the curvature constant over the domain in use.
    fn curvature_bound(&self) -> Option<f64> {
        None
    }

    /// Number of entries the gradient touches.
    fn nnz_hint(&self) -> Option<usize> {
        None
    }

    /// Exact minimizer of `f(x + alpha (s - x))` over `alpha`, unclamped,
    /// when the objective has a closed form for it.
    fn line_search(&self, _x: &P, _s: &P) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `alpha = 2 / (k + 2)`
    Harmonic,
    /// Harmonic for `k < K`, then constant `2 / (K + 2)`.
    FixedAfter(usize),
    LineSearch,
}

impl StepSchedule {
    /// Scheduled step at iteration `k`; line search falls back to harmonic.
    pub fn alpha(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Harmonic | StepSchedule::LineSearch => 2.0 / (k as f64 + 2.0),
            StepSchedule::FixedAfter(big_k) => 2.0 / (k.min(big_k) as f64 + 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmoMode {
    Exact,
    /// Oracle tolerance `alpha_k * C_f`.
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    pub max_iters: usize,
    /// Stop at the first iterate with `gap + slack <= eps`.
    pub gap_tol: Option<f64>,
}

impl Stop {
    pub fn iters(max_iters: usize) -> Self {
        Self { max_iters, gap_tol: None }
    }

    pub fn gap(eps: f64, max_iters: usize) -> Self {
        Self { max_iters, gap_tol: Some(eps) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FwOptions {
    pub schedule: StepSchedule,
    pub stop: Stop,
    pub lmo_mode: LmoMode,
    pub seed: u64,
    /// Record wall-clock milliseconds; off gives byte-identical traces.
    pub timing: bool,
    /// Return the iterate with the smallest certified gap instead of the last.
    pub keep_best: bool,
}

impl FwOptions {
    pub fn new(schedule: StepSchedule, stop: Stop) -> Self {
        Self { schedule, stop, lmo_mode: LmoMode::Exact, seed: 0, timing: false, keep_best: false }
    }

    pub fn approx(mut self) -> Self {
        self.lmo_mode = LmoMode::Approx;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn timing(mut self, on: bool) -> Self {
        self.timing = on;
        self
    }
}

pub enum Start<A> {
    Atom(A),
    /// The domain's non-atom origin, see [`Domain::origin`].
    Origin,
}

pub struct FwResult<D: Domain> {
    pub point: D::Point,
    pub ledger: IterateLedger<D::Atom>,
    pub trace: RunTrace,
    /// Value, gap and slack at the returned iterate.
    pub f: f64,
    pub gap: f64,
    pub slack: f64,
    pub certified: bool,
}

impl<D: Domain> FwResult<D> {
    pub fn certified_gap(&self) -> f64 {
        self.gap + self.slack
    }
}

pub type LmoFn<'a, D> = dyn FnMut(
        &<D as Domain>::Point,
        &<D as Domain>::Grad,
        &LmoRequest,
        &mut FwRng,
    ) -> Result<LinearMin<<D as Domain>::Atom>>
    + 'a;

/// Optional overrides for [`fw_run_with`].
pub struct Hooks<'a, D: Domain> {
    /// Replaces `domain.lmo`; receives the current point as well.
    pub lmo: Option<Box<LmoFn<'a, D>>>,
    /// Called with every iterate before its oracle call.
    pub observe: Option<Box<dyn FnMut(usize, &D::Point) + 'a>>,
    /// Called after each oracle call with `(k, x, f, gap + slack)`; returning
    /// true ends the run at `x`.
    pub stop: Option<Box<StopFn<'a, D>>>,
}

pub type StopFn<'a, D> = dyn FnMut(usize, &<D as Domain>::Point, f64, f64) -> bool + 'a;

impl<D: Domain> Default for Hooks<'_, D> {
    fn default() -> Self {
        Self { lmo: None, observe: None, stop: None }
    }
}

pub fn fw_run<D, O>(objective: &O, domain: &D, start: Start<D::Atom>, opts: &FwOptions) -> Result<FwResult<D>>
where
    D: Domain,
    O: Objective<D::Point, D::Grad> + ?Sized,
{
    fw_run_with(objective, domain, start, opts, Hooks::default())
}

pub fn fw_run_with<D, O>(
    objective: &O,
    domain: &D,
    start: Start<D::Atom>,
    opts: &FwOptions,
    mut hooks: Hooks<'_, D>,
) -> Result<FwResult<D>>
where
    D: Domain,
    O: Objective<D::Point, D::Grad> + ?Sized,
{
    let curvature = match opts.lmo_mode {
        LmoMode::Exact => 0.0,
        LmoMode::Approx => objective.curvature_bound().ok_or_else(|| {
            FwError::InvalidInput("approximate oracle needs a curvature bound".into())
        })?,
    };
    let (mut x, mut ledger) = match start {
        Start::Atom(a) => (domain.atom_point(&a), IterateLedger::from_atom(a)),
        Start::Origin => (
            domain
                .origin()
                .ok_or_else(|| FwError::InvalidInput("domain has no origin start".into()))?,
            IterateLedger::at_origin(),
        ),
    };
    let mut rng = rng::seeded(opts.seed);
    let clock = Instant::now();
    let mut trace = RunTrace::new(Some(opts.seed));
    let mut matvecs = 0u64;
    let mut best: Option<(f64, D::Point, IterateLedger<D::Atom>, f64, f64, f64)> = None;

    let mut k = 0usize;
    loop {
        if let Some(obs) = hooks.observe.as_mut() {
            obs(k, &x);
        }
        let f = ensure_finite(objective.value(&x), "objective", k)?;
        let grad = objective.gradient(&x);
        let xg = ensure_finite(domain.inner(&x, &grad), "gradient", k)?;
        let req = LmoRequest { k, tolerance: curvature * opts.schedule.alpha(k) };
        let lin = match hooks.lmo.as_mut() {
            Some(custom) => custom(&x, &grad, &req, &mut rng)?,
            None => domain.lmo(&grad, &req, &mut rng)?,
        };
        matvecs += lin.matvecs;
        let gap = ensure_finite(xg - lin.value, "duality gap", k)?;
        let millis = if opts.timing { clock.elapsed().as_millis() as u64 } else { 0 };

        if opts.keep_best && best.as_ref().is_none_or(|b| gap + lin.slack < b.0) {
            best = Some((gap + lin.slack, x.clone(), ledger.clone(), f, gap, lin.slack));
        }
        let certified = opts.stop.gap_tol.is_some_and(|eps| gap + lin.slack <= eps);
        let stopped = hooks.stop.as_mut().is_some_and(|stop| stop(k, &x, f, gap + lin.slack));
        let done = certified || stopped || k >= opts.stop.max_iters;
        let alpha = if done {
            0.0
        } else {
            match opts.schedule {
                StepSchedule::LineSearch => line_search_alpha(objective, domain, &x, &lin.atom, k)?,
                s => s.alpha(k),
            }
        };
        trace.rows.push(TraceRow {
            k,
            f,
            gap,
            slack: lin.slack,
            alpha,
            atom: domain.describe(&lin.atom),
            matvecs,
            millis,
        });
        if done {
            let (x, ledger, f, gap, slack) = match best {
                Some((_, bx, bl, bf, bg, bs)) if opts.keep_best => (bx, bl, bf, bg, bs),
                _ => (x, ledger, f, gap, lin.slack),
            };
            let certified = opts.stop.gap_tol.is_some_and(|eps| gap + slack <= eps);
            return Ok(FwResult { point: x, ledger, trace, f, gap, slack, certified });
        }
        domain.blend(&mut x, alpha, &lin.atom);
        ledger.step(domain, alpha, &lin.atom);
        k += 1;
    }
}

/// Gap `<x - s*, grad>` with an exact oracle call.
pub fn duality_gap<D: Domain>(domain: &D, x: &D::Point, grad: &D::Grad) -> Result<f64> {
    let (gap, _) = duality_gap_with(domain, x, grad, 0.0, &mut rng::seeded(0))?;
    Ok(gap)
}

/// Gap estimate and oracle slack at the given tolerance.
pub fn duality_gap_with<D: Domain>(
    domain: &D,
    x: &D::Point,
    grad: &D::Grad,
    tolerance: f64,
    rng: &mut FwRng,
) -> Result<(f64, f64)> {
    let lin = domain.lmo(grad, &LmoRequest { k: 0, tolerance }, rng)?;
    Ok((domain.inner(x, grad) - lin.value, lin.slack))
}

/// Iteration budget `K` for a certified run.
pub fn certified_budget(curvature: f64, eps: f64, mode: LmoMode) -> usize {
    let c = match mode {
        LmoMode::Exact => 4.0,
        LmoMode::Approx => 8.0,
    };
    (c * curvature / eps).ceil().max(1.0) as usize
}

pub struct CertifiedRun<D: Domain> {
    pub result: FwResult<D>,
    pub budget_k: usize,
}

/// Runs `K` harmonic steps followed by `K + 1` steps of size `2/(K+2)` and
/// stops at the first iterate whose gap plus oracle slack is at most `eps`.
/// If none qualifies, the best iterate comes back with `certified = false`.
pub fn gap_certified_run<D, O>(
    objective: &O,
    domain: &D,
    start: Start<D::Atom>,
    eps: f64,
    mode: LmoMode,
    seed: u64,
) -> Result<CertifiedRun<D>>
where
    D: Domain,
    O: Objective<D::Point, D::Grad> + ?Sized,
{
    if eps <= 0.0 || !eps.is_finite() {
        return Err(FwError::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let curvature = objective
        .curvature_bound()
        .ok_or_else(|| FwError::InvalidInput("certified run needs a curvature bound".into()))?;
    let big_k = certified_budget(curvature, eps, mode);
    let mut opts = FwOptions::new(StepSchedule::FixedAfter(big_k), Stop::gap(eps, 2 * big_k + 1)).seed(seed);
    opts.lmo_mode = mode;
    opts.keep_best = true;
    let result = fw_run(objective, domain, start, &opts)?;
    Ok(CertifiedRun { result, budget_k: big_k })
}

/// `C_f <= diam^2 * sup lambda_max(Hessian) / 2`
pub fn curvature_from_hessian(sup_hessian_eig: f64, diameter_sq: f64) -> f64 {
    assert!(sup_hessian_eig >= 0.0 && diameter_sq >= 0.0);
    0.5 * diameter_sq * sup_hessian_eig
}
