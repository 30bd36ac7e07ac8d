//! Approximate feasibility for semidefinite programs over the trace-`t`
//! spectahedron.
//!
//! The constraints `A_i • X <= b_i` are merged into the smooth potential
//! `f(X) = 1/sigma log sum_i exp(sigma (A_i • X - b_i))`, which sits between
//! the largest violation and the largest violation plus `log(m) / sigma`.
//! Minimizing `f` with rank-one steps either finds `X` violating every
//! constraint by at most `eps`, or a lower bound on `f` proving that no
//! point of the domain satisfies them all.
//!
//! Iterates are stored densely, so this is meant for `n` up to a few hundred.

use std::fs;
use std::path::Path;

use crate::eigen;
use crate::error::{FwError, Result};
use crate::fw::{fw_run_with, FwOptions, Hooks, IterateLedger, LmoMode, Objective, RunTrace, Start, StepSchedule, Stop};
use crate::linalg::{DenseSym, SparseSym, SymOp, SymmetricOperator};
use crate::matrix::{RankOne, Spectahedron};

/// Find `X >= 0` with `tr X = t` and `A_i • X <= b_i` for all `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilitySdp {
    pub n: usize,
    pub constraints: Vec<(SparseSym, f64)>,
    pub t: f64,
}

impl FeasibilitySdp {
    pub fn new(n: usize, constraints: Vec<(SparseSym, f64)>, t: f64) -> Result<Self> {
        if n == 0 {
            return Err(FwError::InvalidInput("dimension must be positive".into()));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(FwError::InvalidInput(format!("trace bound must be positive, got {t}")));
        }
        if constraints.is_empty() {
            return Err(FwError::InvalidInput("no constraints".into()));
        }
        for (k, (a, b)) in constraints.iter().enumerate() {
            crate::error::ensure_dim(n, a.n)?;
            if !b.is_finite() || a.entries.iter().any(|e| !e.2.is_finite()) {
                return Err(FwError::InvalidInput(format!("constraint {k} has non-finite data")));
            }
            if a.entries.iter().any(|e| e.0 > e.1 || e.1 >= n) {
                return Err(FwError::InvalidInput(format!("constraint {k} is not in upper-triangular form")));
            }
        }
        Ok(Self { n, constraints, t })
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    /// `A_i • X`
    pub fn values(&self, x: &DenseSym) -> Vec<f64> {
        self.constraints.iter().map(|(a, _)| a.frob_inner_dense(x)).collect()
    }

    /// `A_i • X - b_i`
    pub fn violations(&self, x: &DenseSym) -> Vec<f64> {
        self.constraints.iter().map(|(a, b)| a.frob_inner_dense(x) - b).collect()
    }

    pub fn max_violation(&self, x: &DenseSym) -> f64 {
        self.violations(x).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Adds `A • X <= b`.
    pub fn with_constraint(&self, a: SparseSym, b: f64) -> Result<Self> {
        let mut constraints = self.constraints.clone();
        constraints.push((a, b));
        Self::new(self.n, constraints, self.t)
    }

    /// `max_i ||A_i||_2`, exact up to `n = 500` and from the power method
    /// at relative accuracy `1e-6` beyond.
    pub fn max_spectral_norm(&self) -> Result<f64> {
        let mut best = 0.0f64;
        let mut rng = crate::rng::seeded(0);
        for (a, _) in &self.constraints {
            let norm = if self.n <= 500 {
                eigen::spectral_norm(&a.to_dense())
            } else {
                let l = eigen::spectral_range_bound(a);
                let eps = 1e-6 * l.max(f64::MIN_POSITIVE);
                let hi = eigen::approx_largest_ev(a, eps, l, &mut rng)?.rayleigh;
                let lo = eigen::approx_smallest_ev(a, eps, l, &mut rng)?.rayleigh;
                hi.abs().max(lo.abs()) + eps
            };
            best = best.max(norm);
        }
        Ok(best)
    }
}

/// Log-sum-exp of `sigma * r_i`, divided by `sigma`, with the softmax weights.
pub fn softmax(residuals: &[f64], sigma: f64) -> (f64, Vec<f64>) {
    assert!(sigma > 0.0 && !residuals.is_empty());
    let top = residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = residuals.iter().map(|r| (sigma * (r - top)).exp()).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    (top + sum.ln() / sigma, w)
}

/// `f(X)` and `sum_i w_i A_i`.
pub fn softmax_eval_grad(sdp: &FeasibilitySdp, sigma: f64, x: &DenseSym) -> (f64, SymOp) {
    let (f, w) = softmax(&sdp.violations(x), sigma);
    (f, weighted_constraints(sdp, &w))
}

fn weighted_constraints(sdp: &FeasibilitySdp, w: &[f64]) -> SymOp {
    let parts: Vec<(&SparseSym, f64)> = sdp.constraints.iter().zip(w).map(|((a, _), &wi)| (a, wi)).collect();
    SymOp::Sparse(SparseSym::weighted_sum(sdp.n, &parts))
}

#[derive(Debug, Clone)]
pub struct SoftMaxPotential<'a> {
    pub sdp: &'a FeasibilitySdp,
    pub sigma: f64,
    pub curvature: f64,
}

impl<'a> SoftMaxPotential<'a> {
    /// `C_f = sigma t^2 max_i ||A_i||^2`: along a segment the second
    /// derivative is `sigma` times a weighted variance of values that vary
    /// by at most `2 t ||A_i||`.
    pub fn new(sdp: &'a FeasibilitySdp, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(FwError::InvalidInput(format!("sigma must be positive, got {sigma}")));
        }
        let norm = sdp.max_spectral_norm()?;
        Ok(Self { sdp, sigma, curvature: sigma * (sdp.t * norm).powi(2) })
    }

    fn along(&self, ax: &[f64], as_: &[f64], alpha: f64) -> (f64, Vec<f64>) {
        let r: Vec<f64> = ax
            .iter()
            .zip(as_)
            .zip(&self.sdp.constraints)
            .map(|((x, s), (_, b))| (1.0 - alpha) * x + alpha * s - b)
            .collect();
        softmax(&r, self.sigma)
    }
}

impl Objective<DenseSym, SymOp> for SoftMaxPotential<'_> {
    fn value(&self, x: &DenseSym) -> f64 {
        softmax(&self.sdp.violations(x), self.sigma).0
    }

    fn gradient(&self, x: &DenseSym) -> SymOp {
        softmax_eval_grad(self.sdp, self.sigma, x).1
    }

    fn curvature_bound(&self) -> Option<f64> {
        Some(self.curvature)
    }

    /// Bisection on the slope, which only needs the constraint values at
    /// both ends.
    fn line_search(&self, x: &DenseSym, s: &DenseSym) -> Option<f64> {
        let ax = self.sdp.values(x);
        let as_ = self.sdp.values(s);
        let d: Vec<f64> = as_.iter().zip(&ax).map(|(s, x)| s - x).collect();
        let slope = |alpha: f64| {
            let (_, w) = self.along(&ax, &as_, alpha);
            w.iter().zip(&d).map(|(w, d)| w * d).sum::<f64>()
        };
        if slope(0.0) >= 0.0 {
            return Some(0.0);
        }
        if slope(1.0) <= 0.0 {
            return Some(1.0);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    /// Every constraint holds up to `eps`.
    Feasible,
    /// `f > eps` on the whole domain, so no point satisfies all constraints.
    Infeasible,
    /// Budget exhausted without either conclusion.
    Undetermined,
}

#[derive(Debug, Clone)]
pub struct SdpOptions {
    /// Iteration cap as a multiple of `max(log m, 1) (t max ||A_i||)^2 / eps^2`.
    pub budget_constant: f64,
    /// Largest `n` solved with exact eigenvectors; beyond it the power
    /// method runs at tolerance `alpha_k C_f`.
    pub dense_limit: usize,
    pub seed: u64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { budget_constant: 20.0, dense_limit: 500, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// The iterate with the smallest maximal violation seen.
    pub x: DenseSym,
    pub ledger: IterateLedger<RankOne>,
    pub max_violation: f64,
    pub f: f64,
    /// Certified lower bound `f - gap - slack` on `min f`, best seen.
    pub lower_bound: f64,
    pub sigma: f64,
    pub curvature: f64,
    pub budget: usize,
    /// Oracle calls, one eigenvector computation each.
    pub eig_calls: usize,
    pub matvecs: u64,
    pub trace: RunTrace,
}

/// Iteration budget `ceil(c max(log m, 1) (t max ||A_i||)^2 / eps^2)`.
pub fn eig_budget(m: usize, scale: f64, eps: f64, constant: f64) -> usize {
    let log_m = (m as f64).ln().max(1.0);
    (constant * log_m * scale * scale / (eps * eps)).ceil().max(1.0) as usize
}

/// Searches for `X` with `A_i • X <= b_i + eps`, using
/// `sigma = max(log m, 1) / eps` so that `f` overestimates the largest
/// violation by at most `eps`.
pub fn solve_eps_feasible(sdp: &FeasibilitySdp, eps: f64, opts: &SdpOptions) -> Result<SdpSolution> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(FwError::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let m = sdp.m();
    let sigma = (m as f64).ln().max(1.0) / eps;
    let potential = SoftMaxPotential::new(sdp, sigma)?;
    let scale = sdp.t * sdp.max_spectral_norm()?;
    let budget = eig_budget(m, scale, eps, opts.budget_constant);
    let mut domain = Spectahedron::dense(sdp.n, sdp.t);
    domain.dense_limit = opts.dense_limit;
    let mut fw = FwOptions::new(StepSchedule::LineSearch, Stop::iters(budget)).seed(opts.seed);
    // Small problems take exact eigenvectors: a zero-slack gap certifies
    // infeasibility far sooner than the `alpha_k C_f` tolerance allows.
    fw.lmo_mode = if sdp.n <= domain.dense_limit || potential.curvature == 0.0 { LmoMode::Exact } else { LmoMode::Approx };

    let mut best: Option<(f64, DenseSym)> = None;
    let mut lower = f64::NEG_INFINITY;
    let mut status = SdpStatus::Undetermined;
    let stop = |_k: usize, x: &DenseSym, f: f64, gap: f64| {
        let viol = sdp.max_violation(x);
        if best.as_ref().is_none_or(|b| viol < b.0) {
            best = Some((viol, x.clone()));
        }
        lower = lower.max(f - gap);
        if viol <= eps {
            status = SdpStatus::Feasible;
        } else if lower > eps {
            status = SdpStatus::Infeasible;
        }
        status != SdpStatus::Undetermined
    };
    let hooks = Hooks { lmo: None, observe: None, stop: Some(Box::new(stop)) };
    let res = fw_run_with(&potential, &domain, Start::Atom(RankOne::basis(sdp.n, 0)), &fw, hooks)?;
    let (max_violation, x) = best.unwrap_or_else(|| (sdp.max_violation(&res.point), res.point.clone()));
    Ok(SdpSolution {
        status,
        f: potential.value(&x),
        x,
        max_violation,
        lower_bound: lower,
        sigma,
        curvature: potential.curvature,
        budget,
        eig_calls: res.trace.rows.len(),
        matvecs: res.trace.total_matvecs(),
        trace: res.trace,
        ledger: res.ledger,
    })
}

#[derive(Debug, Clone)]
pub struct ObjectiveSearch {
    /// Best `eps`-feasible point found, with `C • X >= lo - eps`.
    pub x: Option<DenseSym>,
    pub lo: f64,
    pub hi: f64,
    pub rounds: usize,
    /// Rounds whose guess could be neither confirmed nor refuted; they
    /// count as refuted.
    pub undetermined: usize,
}

/// Default bracket `[-2 ||C||_F t, 2 ||C||_F t]` for `C • X` on the domain.
pub fn default_value_range(c: &SparseSym, t: f64) -> (f64, f64) {
    let r = 2.0 * c.frobenius_norm() * t;
    (-r, r)
}

/// Maximizes `C • X` subject to the constraints of `sdp` by bisecting on
/// the guess `gamma`, each round adding `-C • X <= -gamma`. Stops after
/// `rounds` rounds or once the bracket is narrower than `eps`, below which
/// guesses cannot be told apart.
pub fn binary_search_objective(
    c: &SparseSym,
    sdp: &FeasibilitySdp,
    eps: f64,
    range: Option<(f64, f64)>,
    rounds: usize,
    opts: &SdpOptions,
) -> Result<ObjectiveSearch> {
    crate::error::ensure_dim(sdp.n, c.n)?;
    let (mut lo, mut hi) = range.unwrap_or_else(|| default_value_range(c, sdp.t));
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(FwError::InvalidInput(format!("bad value range [{lo}, {hi}]")));
    }
    let neg = c.scaled(-1.0);
    let mut x = None;
    let mut undetermined = 0;
    let mut done = 0;
    for _ in 0..rounds {
        if hi - lo <= eps {
            break;
        }
        let gamma = 0.5 * (lo + hi);
        let sol = solve_eps_feasible(&sdp.with_constraint(neg.clone(), -gamma)?, eps, opts)?;
        done += 1;
        match sol.status {
            SdpStatus::Feasible => {
                lo = gamma;
                x = Some(sol.x);
            }
            SdpStatus::Infeasible => hi = gamma,
            SdpStatus::Undetermined => {
                hi = gamma;
                undetermined += 1;
            }
        }
    }
    Ok(ObjectiveSearch { x, lo, hi, rounds: done, undetermined })
}

/// Optimization problem read from a file: the feasibility constraints plus
/// an optional objective matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub sdp: FeasibilitySdp,
    pub objective: Option<SparseSym>,
}

/// Reads the plain-text problem format:
///
/// ```text
/// # comment
/// n 3
/// t 1.0
/// A
/// 0 0 1.0
/// 1 2 -0.5
/// A
/// 2 2 1.0
/// b 1.0 0.25
/// C
/// 0 1 1.0
/// ```
///
/// Each `A` line opens the next constraint matrix, followed by `i j value`
/// lines with 0-based indices; an entry and its mirror are the same entry.
/// `b` lists one bound per constraint (possibly over several `b` lines).
/// An optional `C` block gives an objective to maximize. `t` defaults to 1.
pub fn parse_sdp(text: &str, source: &str) -> Result<SdpProblem> {
    enum Block {
        None,
        A,
        C,
    }
    let err = |line: usize, msg: String| FwError::Parse { path: source.to_string(), line, msg };
    let mut n: Option<usize> = None;
    let mut t = 1.0;
    let mut blocks: Vec<Vec<(usize, usize, f64)>> = Vec::new();
    let mut objective: Option<Vec<(usize, usize, f64)>> = None;
    let mut b = Vec::new();
    let mut block = Block::None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(line_no, format!("`{s}`: {e}")));
        match fields[0] {
            "n" => {
                let [_, v] = fields[..] else { return Err(err(line_no, "expected `n <dim>`".into())) };
                n = Some(v.parse().map_err(|e| err(line_no, format!("dimension: {e}")))?);
                block = Block::None;
            }
            "t" => {
                let [_, v] = fields[..] else { return Err(err(line_no, "expected `t <bound>`".into())) };
                t = num(v)?;
                block = Block::None;
            }
            "A" if fields.len() == 1 => {
                blocks.push(Vec::new());
                block = Block::A;
            }
            "C" if fields.len() == 1 => {
                if objective.is_some() {
                    return Err(err(line_no, "second objective block".into()));
                }
                objective = Some(Vec::new());
                block = Block::C;
            }
            "b" => {
                for v in &fields[1..] {
                    b.push(num(v)?);
                }
                block = Block::None;
            }
            _ => {
                let [i, j, v] = fields[..] else { return Err(err(line_no, format!("unexpected line `{line}`"))) };
                let dim = n.ok_or_else(|| err(line_no, "entry before `n`".into()))?;
                let i: usize = i.parse().map_err(|e| err(line_no, format!("row index: {e}")))?;
                let j: usize = j.parse().map_err(|e| err(line_no, format!("column index: {e}")))?;
                if i >= dim || j >= dim {
                    return Err(err(line_no, format!("index ({i}, {j}) outside dimension {dim}")));
                }
                let v = num(v)?;
                let entry = (i.min(j), i.max(j), v);
                match block {
                    Block::A => blocks.last_mut().expect("open block").push(entry),
                    Block::C => objective.as_mut().expect("open block").push(entry),
                    Block::None => return Err(err(line_no, "entry outside an `A` or `C` block".into())),
                }
            }
        }
    }
    let n = n.ok_or_else(|| err(0, "missing `n`".into()))?;
    if b.len() != blocks.len() {
        return Err(err(0, format!("{} constraint blocks but {} bounds", blocks.len(), b.len())));
    }
    let constraints = blocks.into_iter().zip(b).map(|(e, bi)| (SparseSym::from_triplets(n, e), bi)).collect();
    let sdp = FeasibilitySdp::new(n, constraints, t)?;
    Ok(SdpProblem { sdp, objective: objective.map(|e| SparseSym::from_triplets(n, e)) })
}

pub fn load_sdp(path: &Path) -> Result<SdpProblem> {
    parse_sdp(&fs::read_to_string(path)?, &path.display().to_string())
}

/// `A_i • X` from the rank-one factors of `X`.
pub fn factored_values(sdp: &FeasibilitySdp, ledger: &IterateLedger<RankOne>) -> Vec<f64> {
    sdp.constraints
        .iter()
        .map(|(a, _)| ledger.atoms.iter().map(|(w, atom)| w * sdp.t * a.quad(&atom.v)).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_single_and_equal() {
        let (f, w) = softmax(&[0.3], 7.0);
        assert_eq!(f, 0.3);
        assert_eq!(w, vec![1.0]);
        let (f, w) = softmax(&[0.5; 4], 2.0);
        assert!((f - (0.5 + 4f64.ln() / 2.0)).abs() < 1e-15);
        assert!(w.iter().all(|x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn softmax_no_overflow() {
        let (f, w) = softmax(&[1e3, -1e3], 1e4);
        assert_eq!(f, 1e3);
        assert_eq!(w[0], 1.0);
    }

    #[test]
    fn parses_blocks() {
        let text = "n 3\nt 2\nA\n0 0 1\n2 1 0.5\nA # second\n1 1 -1\nb 1 -0.5\nC\n0 2 1\n";
        let p = parse_sdp(text, "inline").unwrap();
        assert_eq!(p.sdp.m(), 2);
        assert_eq!(p.sdp.t, 2.0);
        assert_eq!(p.sdp.constraints[0].0.entries, vec![(0, 0, 1.0), (1, 2, 0.5)]);
        assert_eq!(p.sdp.constraints[1].1, -0.5);
        assert_eq!(p.objective.unwrap().entries, vec![(0, 2, 1.0)]);
    }

    #[test]
    fn parse_errors_carry_lines() {
        match parse_sdp("n 2\nA\n0 5 1\nb 1\n", "f") {
            Err(FwError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_sdp("n 2\nA\n0 0 1\n", "f"), Err(FwError::Parse { line: 0, .. })));
    }
}
