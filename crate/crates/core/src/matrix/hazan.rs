use super::spectahedron::{spect_lmo, PsdCache, RankOne, Spectahedron};
use crate::eigen::{self, StartVector};
use crate::error::{FwError, Result};
use crate::fw::{fw_run_with, FwOptions, FwResult, Hooks, LinearMin, LmoMode, LmoRequest, Objective, Start, StepSchedule, Stop};
use crate::linalg::{axpy, norm2, normalize, SymOp, SymmetricOperator};
use crate::rng::{self, FwRng};

/// Power iterations per oracle call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerBudget {
    /// Derived from the requested accuracy.
    Accuracy,
    /// `ceil(slope * k) + offset` at step `k`, counting steps from 1.
    Linear { slope: f64, offset: usize },
}

impl PowerBudget {
    pub fn iterations(&self, step: usize) -> Option<usize> {
        match *self {
            PowerBudget::Accuracy => None,
            PowerBudget::Linear { slope, offset } => Some((slope * step as f64).ceil() as usize + offset),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftPolicy {
    /// Half the spectral range bound; always makes the shifted operator PSD.
    RangeBound,
    /// Half the eigenvalue found in the previous step. The first step takes
    /// half the norm of the first product.
    HalfPrevious,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HazanStart {
    /// `t e_1 e_1^T`
    FirstBasis,
    /// `t v v^T` for a random unit `v`.
    Random,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HazanOptions {
    pub max_iters: usize,
    pub gap_tol: Option<f64>,
    pub line_search: bool,
    /// Multiply power iterates by the average of the current gradient and
    /// the gradient at the tentatively updated point. Heuristic: the oracle
    /// then reports infinite slack.
    pub grad_averaging: bool,
    pub lmo_mode: LmoMode,
    pub budget: PowerBudget,
    pub shift: ShiftPolicy,
    pub start: HazanStart,
    /// Start each power iteration from the previous step's eigenvector.
    pub warm_start: bool,
    pub seed: u64,
    pub timing: bool,
}

impl Default for HazanOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            gap_tol: None,
            line_search: false,
            grad_averaging: false,
            lmo_mode: LmoMode::Approx,
            budget: PowerBudget::Accuracy,
            shift: ShiftPolicy::RangeBound,
            start: HazanStart::FirstBasis,
            warm_start: false,
            seed: 0,
            timing: false,
        }
    }
}

pub fn hazan_run<C, O>(objective: &O, domain: &Spectahedron<C>, opts: &HazanOptions) -> Result<FwResult<Spectahedron<C>>>
where
    C: PsdCache,
    O: Objective<C, SymOp> + ?Sized,
{
    hazan_run_observed(objective, domain, opts, None)
}

/// [`hazan_run`] with a callback on every iterate.
pub fn hazan_run_observed<C, O>(
    objective: &O,
    domain: &Spectahedron<C>,
    opts: &HazanOptions,
    observe: Option<&mut (dyn FnMut(usize, &C) + '_)>,
) -> Result<FwResult<Spectahedron<C>>>
where
    C: PsdCache,
    O: Objective<C, SymOp> + ?Sized,
{
    let n = domain.n;
    let t = domain.t;
    let start = match &opts.start {
        HazanStart::FirstBasis => RankOne::basis(n, 0),
        HazanStart::Random => RankOne { v: rng::unit_sphere(&mut rng::split(opts.seed, 1), n) },
        HazanStart::Given(v) => {
            crate::error::ensure_dim(n, v.len())?;
            let mut v = v.clone();
            if normalize(&mut v) == 0.0 {
                return Err(FwError::InvalidInput("zero start vector".into()));
            }
            RankOne { v }
        }
    };
    let schedule = if opts.line_search { StepSchedule::LineSearch } else { StepSchedule::Harmonic };
    let mut fw = FwOptions::new(schedule, Stop { max_iters: opts.max_iters, gap_tol: opts.gap_tol });
    fw.lmo_mode = opts.lmo_mode;
    fw.seed = opts.seed;
    fw.timing = opts.timing;

    let mut previous: Option<f64> = None;
    let mut last_v: Option<Vec<f64>> = None;
    let lmo = move |x: &C, g: &SymOp, req: &LmoRequest, rng: &mut FwRng| -> Result<LinearMin<RankOne>> {
        let mut eo = domain.eig.clone();
        if let (true, Some(v)) = (opts.warm_start, &last_v) {
            eo.start = StartVector::Given(v.clone());
        }
        eo.iterations = opts.budget.iterations(req.k + 1).or(eo.iterations);
        if opts.shift == ShiftPolicy::HalfPrevious {
            match previous {
                Some(lam) => eo.shift = Some(0.5 * lam.max(0.0)),
                None => eo.shift_from_start = Some(0.5),
            }
        }
        let lin = if opts.grad_averaging {
            averaged_lmo(objective, domain, x, g, req, &eo, rng)?
        } else {
            spect_lmo(g, req.tolerance, t, &eo, domain.dense_limit, rng)?
        };
        previous = Some(-lin.value / t);
        if opts.warm_start {
            last_v = Some(lin.atom.v.clone());
        }
        Ok(lin)
    };
    let observe = observe.map(|f| Box::new(move |k: usize, x: &C| f(k, x)) as Box<dyn FnMut(usize, &C) + '_>);
    fw_run_with(objective, domain, Start::Atom(start), &fw, Hooks { lmo: Some(Box::new(lmo)), observe, stop: None })
}

/// Power method on `-(G + G(X_bar)) / 2`, where `X_bar` blends the current
/// iterate with the candidate `t v v^T` at weight `1 / (k + 1)`.
fn averaged_lmo<C, O>(
    objective: &O,
    domain: &Spectahedron<C>,
    x: &C,
    g: &SymOp,
    req: &LmoRequest,
    eo: &eigen::EigOptions,
    rng: &mut FwRng,
) -> Result<LinearMin<RankOne>>
where
    C: PsdCache,
    O: Objective<C, SymOp> + ?Sized,
{
    let n = domain.n;
    let t = domain.t;
    let range = eigen::spectral_range_bound(g);
    let iters = match eo.iterations {
        Some(i) => i,
        None if req.tolerance > 0.0 => eigen::power_iterations(n, req.tolerance / t, range, eo.constant),
        None => return Err(FwError::Lmo("gradient averaging needs a tolerance or an iteration budget".into())),
    };
    let mut v = match &eo.start {
        StartVector::Random => rng::unit_sphere(rng, n),
        StartVector::Uniform => vec![1.0 / (n as f64).sqrt(); n],
        StartVector::Given(v) => v.clone(),
    };
    normalize(&mut v);
    let beta = 1.0 / (req.k as f64 + 1.0);
    let mut shift = eo.shift.or(if eo.shift_from_start.is_some() { None } else { Some(0.5 * range) });
    let mut y = vec![0.0; n];
    let mut matvecs = 0u64;
    for _ in 0..iters {
        let mut xb = x.clone();
        xb.blend_rank_one(beta, t, &v);
        let op = g.average(&objective.gradient(&xb));
        op.apply(&v, &mut y);
        matvecs += 1;
        y.iter_mut().for_each(|e| *e = -*e);
        let s = *shift.get_or_insert_with(|| eo.shift_from_start.unwrap_or(0.5) * norm2(&y));
        axpy(s, &v, &mut y);
        if !y.iter().all(|e| e.is_finite()) {
            return Err(FwError::NonFinite { what: "matrix-vector product", k: req.k });
        }
        if normalize(&mut y) == 0.0 {
            break;
        }
        std::mem::swap(&mut v, &mut y);
    }
    matvecs += 1;
    let value = t * g.quadratic_form(&v);
    Ok(LinearMin { atom: RankOne { v }, value, slack: f64::INFINITY, matvecs })
}
