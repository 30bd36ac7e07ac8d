use super::is_psd;
use crate::eigen::{self, dense_eig, EigOptions};
use crate::error::{FwError, Result};
use crate::fw::{Domain, IterateLedger, LinearMin, LmoRequest, Objective};
use crate::linalg::{norm2, DenseSym, SymOp, SymmetricOperator};
use crate::rng::{self, FwRng};

/// Atom `t v v^T` of the trace-`t` spectahedron; `v` has unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOne {
    pub v: Vec<f64>,
}

impl RankOne {
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self { v }
    }

    fn describe(&self) -> String {
        let mut best = 0;
        for (i, x) in self.v.iter().enumerate() {
            if x.abs() > self.v[best].abs() {
                best = i;
            }
        }
        format!("rank1@{best}")
    }
}

/// Whatever a spectahedron iterate is stored as: the full dense matrix, or
/// only the entries an objective reads.
pub trait PsdCache: Clone + Send + Sync {
    /// A cache of the same layout holding `t v v^T`.
    fn rank_one_like(&self, t: f64, v: &[f64]) -> Self;

    /// `X <- (1 - alpha) X + alpha t v v^T`
    fn blend_rank_one(&mut self, alpha: f64, t: f64, v: &[f64]);

    /// `X • G`
    fn inner(&self, grad: &SymOp) -> f64;

    fn max_abs_diff(&self, other: &Self) -> f64;

    /// Membership in the trace-`t` spectahedron, when checkable.
    fn membership(&self, _t: f64) -> Option<bool> {
        None
    }
}

impl PsdCache for DenseSym {
    fn rank_one_like(&self, t: f64, v: &[f64]) -> Self {
        DenseSym::rank_one(v, t)
    }

    fn blend_rank_one(&mut self, alpha: f64, t: f64, v: &[f64]) {
        DenseSym::blend_rank_one(self, alpha, t, v);
    }

    fn inner(&self, grad: &SymOp) -> f64 {
        grad.frob_inner_dense(self)
    }

    fn max_abs_diff(&self, other: &Self) -> f64 {
        DenseSym::max_abs_diff(self, other)
    }

    fn membership(&self, t: f64) -> Option<bool> {
        Some((self.trace() - t).abs() <= 1e-9 * t.max(1.0) && is_psd(self, 1e-10))
    }
}

/// `{X >= 0, tr X = t}` in dimension `n`, with iterates stored as `C`.
#[derive(Debug, Clone)]
pub struct Spectahedron<C> {
    pub n: usize,
    pub t: f64,
    pub proto: C,
    pub eig: EigOptions,
    /// Largest dimension at which a zero-tolerance request is answered by
    /// the dense eigensolver.
    pub dense_limit: usize,
}

impl Spectahedron<DenseSym> {
    pub fn dense(n: usize, t: f64) -> Self {
        Self::with_cache(n, t, DenseSym::zeros(n))
    }
}

impl<C: PsdCache> Spectahedron<C> {
    pub fn with_cache(n: usize, t: f64, proto: C) -> Self {
        assert!(n > 0 && t > 0.0);
        Self { n, t, proto, eig: EigOptions::default(), dense_limit: 500 }
    }

    pub fn diameter_sq(&self) -> f64 {
        2.0 * self.t * self.t
    }
}

/// Rank-one oracle: `t v v^T` with `v` an approximate smallest eigenvector of
/// `grad`, accurate to `tolerance` in objective units. A fixed iteration
/// budget in `opts` gives no accuracy guarantee and reports infinite slack.
pub fn spect_lmo(
    grad: &SymOp,
    tolerance: f64,
    t: f64,
    opts: &EigOptions,
    dense_limit: usize,
    rng: &mut FwRng,
) -> Result<LinearMin<RankOne>> {
    let n = grad.dim();
    if tolerance <= 0.0 && opts.iterations.is_none() {
        if n > dense_limit {
            return Err(FwError::Lmo(format!("exact eigenvector requested at n = {n}")));
        }
        let e = dense_eig(&grad.to_dense());
        let v = e.vector(n - 1);
        let value = t * grad.quadratic_form(&v);
        return Ok(LinearMin { atom: RankOne { v }, value, slack: 0.0, matvecs: 0 });
    }
    let l = eigen::spectral_range_bound(grad);
    let res = eigen::approx_smallest_ev_with(grad, tolerance / t, l, opts, rng)?;
    let slack = if opts.iterations.is_some() { f64::INFINITY } else { tolerance };
    Ok(LinearMin { value: t * res.rayleigh, atom: RankOne { v: res.v }, slack, matvecs: res.matvecs })
}

impl<C: PsdCache> Domain for Spectahedron<C> {
    type Point = C;
    type Grad = SymOp;
    type Atom = RankOne;

    fn lmo(&self, grad: &SymOp, req: &LmoRequest, rng: &mut FwRng) -> Result<LinearMin<RankOne>> {
        crate::error::ensure_dim(self.n, grad.dim())?;
        spect_lmo(grad, req.tolerance, self.t, &self.eig, self.dense_limit, rng)
    }

    fn inner(&self, x: &C, grad: &SymOp) -> f64 {
        x.inner(grad)
    }

    fn atom_value(&self, atom: &RankOne, grad: &SymOp) -> f64 {
        self.t * grad.quadratic_form(&atom.v)
    }

    fn atom_point(&self, atom: &RankOne) -> C {
        self.proto.rank_one_like(self.t, &atom.v)
    }

    fn blend(&self, x: &mut C, alpha: f64, atom: &RankOne) {
        x.blend_rank_one(alpha, self.t, &atom.v);
    }

    fn describe(&self, atom: &RankOne) -> String {
        atom.describe()
    }

    fn contains(&self, x: &C) -> bool {
        x.membership(self.t).unwrap_or(true)
    }

    fn max_abs_diff(&self, a: &C, b: &C) -> f64 {
        a.max_abs_diff(b)
    }
}

/// `sum_j w_j t v_j v_j^T`
pub fn factored_dense(ledger: &IterateLedger<RankOne>, n: usize, t: f64) -> DenseSym {
    let mut x = DenseSym::zeros(n);
    for (w, a) in &ledger.atoms {
        x.add_scaled(1.0, &DenseSym::rank_one(&a.v, w * t));
    }
    x
}

/// `X • G` from the factors, one product per atom.
pub fn factored_inner(ledger: &IterateLedger<RankOne>, t: f64, grad: &SymOp) -> f64 {
    ledger.atoms.iter().map(|(w, a)| w * t * grad.quadratic_form(&a.v)).sum()
}

/// Gap estimate `X • G - t lambda_min(G)` and its tolerance `t * eps`.
pub fn spect_gap(
    ledger: &IterateLedger<RankOne>,
    t: f64,
    grad: &SymOp,
    eps: f64,
    rng: &mut FwRng,
) -> Result<(f64, f64)> {
    let lin = spect_lmo(grad, t * eps, t, &EigOptions::default(), 500, rng)?;
    Ok((factored_inner(ledger, t, grad) - lin.value, lin.slack))
}

/// `f(X) = ||X||_F^2`
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SquaredFrobenius {
    pub curvature: Option<f64>,
}

impl Objective<DenseSym, SymOp> for SquaredFrobenius {
    fn value(&self, x: &DenseSym) -> f64 {
        x.frob_norm_sq()
    }

    fn gradient(&self, x: &DenseSym) -> SymOp {
        SymOp::Dense(x.scaled(2.0))
    }

    fn curvature_bound(&self) -> Option<f64> {
        self.curvature
    }

    fn line_search(&self, x: &DenseSym, s: &DenseSym) -> Option<f64> {
        let mut d = s.clone();
        d.add_scaled(-1.0, x);
        let dd = d.frob_norm_sq();
        (dd > 0.0).then(|| -d.frob_inner(x) / dd)
    }
}

/// `f(X) = ||X - X0||_F^2`
#[derive(Debug, Clone, PartialEq)]
pub struct FrobeniusDistance {
    pub x0: DenseSym,
    pub curvature: Option<f64>,
}

impl Objective<DenseSym, SymOp> for FrobeniusDistance {
    fn value(&self, x: &DenseSym) -> f64 {
        let mut d = x.clone();
        d.add_scaled(-1.0, &self.x0);
        d.frob_norm_sq()
    }

    fn gradient(&self, x: &DenseSym) -> SymOp {
        let mut d = x.scaled(2.0);
        d.add_scaled(-2.0, &self.x0);
        SymOp::Dense(d)
    }

    fn curvature_bound(&self) -> Option<f64> {
        self.curvature
    }

    fn line_search(&self, x: &DenseSym, s: &DenseSym) -> Option<f64> {
        let mut d = s.clone();
        d.add_scaled(-1.0, x);
        let mut r = x.clone();
        r.add_scaled(-1.0, &self.x0);
        let dd = d.frob_norm_sq();
        (dd > 0.0).then(|| -d.frob_inner(&r) / dd)
    }
}

/// `f(X) = A • X`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSym {
    pub a: SymOp,
}

impl Objective<DenseSym, SymOp> for LinearSym {
    fn value(&self, x: &DenseSym) -> f64 {
        self.a.frob_inner_dense(x)
    }

    fn gradient(&self, _x: &DenseSym) -> SymOp {
        self.a.clone()
    }

    fn curvature_bound(&self) -> Option<f64> {
        Some(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub n: usize,
    pub k: usize,
    /// `||X||_F^2` of `I_k / k` padded with zeros.
    pub uniform_f: f64,
    pub min_sample_f: f64,
    /// Smallest `X • 2X - lambda_min(2X)` over samples (infinite if `k = n`).
    pub min_sample_gap: f64,
    /// `||u u^T - v v^T||_F^2` for a random orthonormal pair.
    pub orthogonal_distance_sq: f64,
    pub samples: usize,
}

impl RankReport {
    pub fn passes(&self) -> bool {
        let k = self.k as f64;
        (self.uniform_f - 1.0 / k).abs() <= crate::vector::UNIFORM_ULPS * f64::EPSILON / k
            && self.min_sample_f >= 1.0 / k - 1e-10
            && (self.k == self.n || self.min_sample_gap >= 1.0 / k - 1e-10)
            && (self.orthogonal_distance_sq - 2.0).abs() <= 1e-12
    }
}

/// Random trace-one PSD matrix of rank at most `k`.
pub fn random_lowrank_spectahedron_point(rng: &mut FwRng, n: usize, k: usize) -> DenseSym {
    use rand::Rng;
    let rank = rng.random_range(1..=k);
    let w = rng::simplex_point(rng, rank);
    let mut x = DenseSym::zeros(n);
    for wj in w {
        let u = rng::unit_sphere(rng, n);
        x.add_scaled(1.0, &DenseSym::rank_one(&u, wj));
    }
    x
}

/// Checks the rank lower bounds for `||X||_F^2` on the unit-trace
/// spectahedron and the diameter of the set.
pub fn spect_lowrank_lowerbound_suite(n: usize, k: usize, samples: usize, rng: &mut FwRng) -> RankReport {
    assert!(1 <= k && k <= n);
    let mut uniform = DenseSym::zeros(n);
    for i in 0..k {
        uniform.set(i, i, 1.0 / k as f64);
    }
    let f = SquaredFrobenius::default();
    let mut report = RankReport {
        n,
        k,
        uniform_f: f.value(&uniform),
        min_sample_f: f64::INFINITY,
        min_sample_gap: f64::INFINITY,
        orthogonal_distance_sq: f64::NAN,
        samples,
    };
    for _ in 0..samples {
        let x = random_lowrank_spectahedron_point(rng, n, k);
        report.min_sample_f = report.min_sample_f.min(f.value(&x));
        if k < n {
            let g = x.scaled(2.0);
            let gap = g.frob_inner(&x) - eigen::lambda_min(&g);
            report.min_sample_gap = report.min_sample_gap.min(gap);
        }
    }
    let u = rng::unit_sphere(rng, n.max(2));
    let mut v = rng::unit_sphere(rng, n.max(2));
    let c = crate::linalg::dot(&u, &v);
    crate::linalg::axpy(-c, &u, &mut v);
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut d = DenseSym::rank_one(&u, 1.0);
    d.add_scaled(-1.0, &DenseSym::rank_one(&v, 1.0));
    report.orthogonal_distance_sq = d.frob_norm_sq();
    report
}
