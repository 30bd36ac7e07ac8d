//! Rectangular problems as PSD problems.
//!
//! A matrix `Z` (m x n) sits in the off-diagonal block of a symmetric
//! `X = (V Z; Z^T W)` of order `m + n`. Then
//!
//! * `||Z||_nuc <= t/2` iff some such `X` is PSD with `tr X <= t`, and
//! * `||Z||_max <= t` iff some such `X` is PSD with `X_ii <= t`,
//!
//! so an objective `f(Z)` can be minimized over the trace-`t` spectahedron or
//! over the bounded-diagonal box through [`BlockLifted`]. The norm oracles at
//! the bottom are small dense routines meant for checking these statements.

use crate::eigen;
use crate::error::{ensure_dim, FwError, Result};
use crate::fw::{IterateLedger, Objective};
use crate::linalg::{dot, thin_svd, DenseMat, DenseSym, SymOp};
use crate::matrix::{BoundedDiag, RankOne, Spectahedron};

/// Block layout of `S^(m+n)` around an `m x n` matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockEmbedding {
    pub m: usize,
    pub n: usize,
}

impl BlockEmbedding {
    pub fn new(m: usize, n: usize) -> Self {
        Self { m, n }
    }

    pub fn total(&self) -> usize {
        self.m + self.n
    }

    /// The `Z` block of `x`.
    pub fn z_block(&self, x: &DenseSym) -> DenseMat {
        DenseMat::from_fn(self.m, self.n, |i, j| x.get(i, self.m + j))
    }

    /// Overwrites both off-diagonal blocks of `x` with `z` and `z^T`.
    pub fn set_z_block(&self, x: &mut DenseSym, z: &DenseMat) {
        for i in 0..self.m {
            for j in 0..self.n {
                x.set(i, self.m + j, z.get(i, j));
            }
        }
    }

    /// `scale * (0 G; G^T 0)`
    pub fn embed(&self, g: &DenseMat, scale: f64) -> DenseSym {
        let mut out = DenseSym::zeros(self.total());
        self.set_z_block(&mut out, &g.scaled(scale));
        out
    }

    /// Splits a vector of length `m + n` into its top and bottom parts.
    pub fn split<'v>(&self, v: &'v [f64]) -> (&'v [f64], &'v [f64]) {
        v.split_at(self.m)
    }
}

/// `f_hat(X) = f(Z)` for the `Z` block of `X`.
///
/// Under the Frobenius product on `S^(m+n)` the gradient is
/// `(0 G; G^T 0) / 2` with `G = grad f(Z)`: a perturbation of the `Z` block
/// shows up twice in `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLifted<O> {
    pub emb: BlockEmbedding,
    pub inner: O,
    pub curvature: Option<f64>,
}

impl<O: Objective<DenseMat, DenseMat>> BlockLifted<O> {
    pub fn new(emb: BlockEmbedding, inner: O) -> Self {
        let curvature = inner.curvature_bound();
        Self { emb, inner, curvature }
    }
}

impl<O: Objective<DenseMat, DenseMat>> Objective<DenseSym, SymOp> for BlockLifted<O> {
    fn value(&self, x: &DenseSym) -> f64 {
        self.inner.value(&self.emb.z_block(x))
    }

    fn gradient(&self, x: &DenseSym) -> SymOp {
        SymOp::Dense(self.emb.embed(&self.inner.gradient(&self.emb.z_block(x)), 0.5))
    }

    fn curvature_bound(&self) -> Option<f64> {
        self.curvature
    }

    fn nnz_hint(&self) -> Option<usize> {
        self.inner.nnz_hint().map(|k| 2 * k)
    }

    fn line_search(&self, x: &DenseSym, s: &DenseSym) -> Option<f64> {
        self.inner.line_search(&self.emb.z_block(x), &self.emb.z_block(s))
    }
}

/// Nuclear-norm ball of radius `t/2` as the trace-`t` spectahedron.
pub fn nuclear_to_spect<O>(objective: O, m: usize, n: usize, t: f64) -> Result<(BlockLifted<O>, Spectahedron<DenseSym>)>
where
    O: Objective<DenseMat, DenseMat>,
{
    if !(t > 0.0) {
        return Err(FwError::InvalidInput(format!("trace bound must be positive, got {t}")));
    }
    let emb = BlockEmbedding::new(m, n);
    Ok((BlockLifted::new(emb, objective), Spectahedron::dense(emb.total(), t)))
}

/// Max-norm ball of radius `t` as the bounded-diagonal box.
pub fn maxnorm_to_boundeddiag<O>(objective: O, m: usize, n: usize, t: f64) -> Result<(BlockLifted<O>, BoundedDiag)>
where
    O: Objective<DenseMat, DenseMat>,
{
    if !(t > 0.0) {
        return Err(FwError::InvalidInput(format!("diagonal bound must be positive, got {t}")));
    }
    let emb = BlockEmbedding::new(m, n);
    Ok((BlockLifted::new(emb, objective), BoundedDiag::new(emb.total(), t)))
}

/// Factors `L` (m x k) and `R` (n x k) with `L R^T` equal to the `Z` block
/// of the iterate `sum_j w_j t v_j v_j^T`; column `j` is `sqrt(t w_j)` times
/// the top or bottom part of `v_j`.
pub fn extract_factorization(ledger: &IterateLedger<RankOne>, emb: BlockEmbedding, t: f64) -> Result<(DenseMat, DenseMat)> {
    let k = ledger.atoms.len();
    let mut l = DenseMat::zeros(emb.m, k);
    let mut r = DenseMat::zeros(emb.n, k);
    for (c, (w, atom)) in ledger.atoms.iter().enumerate() {
        ensure_dim(emb.total(), atom.v.len())?;
        let s = (t * w).sqrt();
        let (top, bot) = emb.split(&atom.v);
        for (i, x) in top.iter().enumerate() {
            l.set(i, c, s * x);
        }
        for (j, x) in bot.iter().enumerate() {
            r.set(j, c, s * x);
        }
    }
    Ok((l, r))
}

/// `(||L||_F^2 + ||R||_F^2) / 2`, an upper bound on `||L R^T||_nuc`.
pub fn factor_bound(l: &DenseMat, r: &DenseMat) -> f64 {
    0.5 * (l.frob_norm_sq() + r.frob_norm_sq())
}

/// `A B^T`
pub fn mul_transposed(a: &DenseMat, b: &DenseMat) -> DenseMat {
    assert_eq!(a.cols, b.cols);
    DenseMat::from_fn(a.rows, b.rows, |i, j| dot(a.row(i), b.row(j)))
}

/// Sum of singular values.
pub fn nuclear_norm_oracle(z: &DenseMat) -> f64 {
    thin_svd(z).s.iter().sum()
}

/// Polar factor `U V^T` of `z`: `||U V^T||_op <= 1` and `<z, U V^T> = ||z||_nuc`.
pub fn polar_factor(z: &DenseMat) -> DenseMat {
    let svd = thin_svd(z);
    let cutoff = 1e-14 * svd.s.first().copied().unwrap_or(0.0);
    let r = svd.s.iter().filter(|&&x| x > cutoff).count();
    DenseMat::from_fn(z.rows, z.cols, |i, j| (0..r).map(|k| svd.u.get(i, k) * svd.v.get(j, k)).sum())
}

/// Witness for the nuclear-norm characterization at `(z, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum NuclearWitness {
    /// PSD `X` with trace `t` and `Z` block `z`.
    Feasible(DenseSym),
    /// PSD `Y = (I -U; -U^T I)` with `2 <z, U> > t`, which no feasible `X`
    /// allows since `X • Y >= 0`.
    Infeasible { y: DenseSym, value: f64 },
}

/// Decides whether some PSD `X` with trace at most `t` has `Z` block `z`.
///
/// The candidate `X` is `(sqrt(ZZ^T) + s e_1 e_1^T, Z; Z^T, sqrt(Z^T Z))`,
/// built from the singular value decomposition,
/// with the slack `s` filling the trace up to `t`; otherwise the polar
/// factor gives a separating `Y`. Both are checked with the dense
/// eigensolver. `None` when neither check passes, which happens only within
/// rounding distance of the boundary.
pub fn nuclear_sdp_witness(z: &DenseMat, t: f64) -> Option<NuclearWitness> {
    let emb = BlockEmbedding::new(z.rows, z.cols);
    let total = emb.total();
    let svd = thin_svd(z);
    let top = svd.left_gram(|s| s);
    let bot = svd.right_gram(|s| s);
    let mut x = DenseSym::zeros(total);
    for i in 0..emb.m {
        for j in 0..emb.m {
            x.data[i * total + j] = top.get(i, j);
        }
    }
    for i in 0..emb.n {
        for j in 0..emb.n {
            x.data[(emb.m + i) * total + emb.m + j] = bot.get(i, j);
        }
    }
    emb.set_z_block(&mut x, z);
    let slack = t - x.trace();
    if slack >= 0.0 {
        x.data[0] += slack;
        if crate::matrix::is_psd(&x, 1e-10) {
            return Some(NuclearWitness::Feasible(x));
        }
    }
    let u = polar_factor(z);
    let mut y = DenseSym::identity(total);
    emb.set_z_block(&mut y, &u.scaled(-1.0));
    let value = 2.0 * z.frob_inner(&u);
    (value > t && crate::matrix::is_psd(&y, 1e-10)).then_some(NuclearWitness::Infeasible { y, value })
}

/// `Some(true)` for a verified PSD lift, `Some(false)` for a verified
/// separating certificate.
pub fn nuclear_sdp_feasible(z: &DenseMat, t: f64) -> Option<bool> {
    nuclear_sdp_witness(z, t).map(|w| matches!(w, NuclearWitness::Feasible(_)))
}

/// Positive row and column weights of the weighted nuclear norm
/// `||diag(sqrt p) Z diag(sqrt q)||_nuc`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVectors {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl WeightVectors {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.iter().chain(&q).any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(FwError::InvalidInput("weights must be positive and finite".into()));
        }
        Ok(Self { p, q })
    }

    pub fn unit(m: usize, n: usize) -> Self {
        Self { p: vec![1.0; m], q: vec![1.0; n] }
    }

    /// `diag(a) z diag(b)` with `a = p^e`, `b = q^e`.
    fn scale(&self, z: &DenseMat, e: f64) -> DenseMat {
        DenseMat::from_fn(z.rows, z.cols, |i, j| self.p[i].powf(e) * z.get(i, j) * self.q[j].powf(e))
    }

    /// `P z Q`
    pub fn weigh(&self, z: &DenseMat) -> DenseMat {
        self.scale(z, 0.5)
    }

    /// `P^-1 z Q^-1`
    pub fn unweigh(&self, z: &DenseMat) -> DenseMat {
        self.scale(z, -0.5)
    }
}

pub fn weighted_nuclear_norm(z: &DenseMat, w: &WeightVectors) -> f64 {
    nuclear_norm_oracle(&w.weigh(z))
}

/// `f_bar(Z_bar) = f(P^-1 Z_bar Q^-1)`; a plain nuclear-norm constraint on
/// `Z_bar` is the weighted constraint on `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNuclear<O> {
    pub inner: O,
    pub weights: WeightVectors,
}

pub fn weighted_nuclear_wrap<O>(inner: O, weights: WeightVectors) -> WeightedNuclear<O> {
    WeightedNuclear { inner, weights }
}

impl<O: Objective<DenseMat, DenseMat>> Objective<DenseMat, DenseMat> for WeightedNuclear<O> {
    fn value(&self, z: &DenseMat) -> f64 {
        self.inner.value(&self.weights.unweigh(z))
    }

    fn gradient(&self, z: &DenseMat) -> DenseMat {
        self.weights.unweigh(&self.inner.gradient(&self.weights.unweigh(z)))
    }

    fn nnz_hint(&self) -> Option<usize> {
        self.inner.nnz_hint()
    }

    fn line_search(&self, x: &DenseMat, s: &DenseMat) -> Option<f64> {
        self.inner.line_search(&self.weights.unweigh(x), &self.weights.unweigh(s))
    }
}

/// `1/2 sum_(ij in S) (Z_ij - y_ij)^2` over listed entries.
#[derive(Debug, Clone, PartialEq)]
pub struct EntrySquares {
    pub m: usize,
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
    pub curvature: Option<f64>,
}

impl EntrySquares {
    pub fn new(m: usize, n: usize, entries: Vec<(usize, usize, f64)>) -> Self {
        Self { m, n, entries, curvature: None }
    }

    /// Every entry of `y` observed.
    pub fn full(y: &DenseMat) -> Self {
        let entries = (0..y.rows).flat_map(|i| (0..y.cols).map(move |j| (i, j))).map(|(i, j)| (i, j, y.get(i, j))).collect();
        Self::new(y.rows, y.cols, entries)
    }
}

impl Objective<DenseMat, DenseMat> for EntrySquares {
    fn value(&self, z: &DenseMat) -> f64 {
        0.5 * self.entries.iter().map(|&(i, j, y)| (z.get(i, j) - y).powi(2)).sum::<f64>()
    }

    fn gradient(&self, z: &DenseMat) -> DenseMat {
        let mut g = DenseMat::zeros(self.m, self.n);
        for &(i, j, y) in &self.entries {
            g.data[i * self.n + j] += z.get(i, j) - y;
        }
        g
    }

    fn curvature_bound(&self) -> Option<f64> {
        self.curvature
    }

    fn nnz_hint(&self) -> Option<usize> {
        Some(self.entries.len())
    }

    fn line_search(&self, x: &DenseMat, s: &DenseMat) -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for &(i, j, y) in &self.entries {
            let d = s.get(i, j) - x.get(i, j);
            num -= (x.get(i, j) - y) * d;
            den += d * d;
        }
        (den > 0.0).then(|| num / den)
    }
}

/// Bracket on `||Z||_max = min_(Z = L R^T) max(||L||_2inf^2, ||R||_2inf^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxNormEstimate {
    /// `2 ||D1^1/2 Z D2^1/2||_nuc` at the best weights found.
    pub lower: f64,
    /// Largest diagonal entry of an explicit PSD completion.
    pub upper: f64,
    /// Simplex weights on the `m + n` rows and columns that gave `lower`.
    pub weights: Vec<f64>,
    pub completion: DenseSym,
    pub rounds: usize,
}

impl MaxNormEstimate {
    pub fn value(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Approximate max norm for small matrices through its PSD characterization.
///
/// For diagonal weights `d` on the simplex the cheapest completion under
/// `sum_i d_i X_ii` is explicit: with `M = D1^1/2 Z D2^1/2 = U S W^T`,
/// `V = D1^-1/2 U S U^T D1^-1/2` and `W = D2^-1/2 W S W^T D2^-1/2`, at
/// weighted cost `2 ||M||_nuc`. The cost bounds the max norm from below,
/// the completion's largest diagonal from above. Multiplicative updates
/// `d_i <- d_i X_ii / cost` close the bracket until its relative width is
/// below `rel_tol` or the round budget runs out.
pub fn max_norm_bracket(z: &DenseMat, rel_tol: f64, max_rounds: usize) -> MaxNormEstimate {
    let total = z.rows + z.cols;
    let mut d = vec![1.0 / total as f64; total];
    let (completion, cost) = weighted_completion(z, &d);
    let mut est = MaxNormEstimate {
        lower: cost,
        upper: max_diag(&completion),
        weights: d.clone(),
        completion,
        rounds: 0,
    };
    for round in 1..=max_rounds {
        if est.upper - est.lower <= rel_tol * est.upper {
            break;
        }
        let (x, cost) = weighted_completion(z, &d);
        if cost <= 0.0 {
            break;
        }
        for (i, di) in d.iter_mut().enumerate() {
            *di *= x.get(i, i) / cost;
        }
        let s: f64 = d.iter().sum();
        d.iter_mut().for_each(|v| *v = (*v / s).max(1e-200));
        let (x, cost) = weighted_completion(z, &d);
        est.rounds = round;
        if cost > est.lower {
            est.lower = cost;
            est.weights = d.clone();
        }
        // Weights near underflow can leave the completion indefinite.
        let top = max_diag(&x);
        if top < est.upper && crate::matrix::is_psd(&x, 1e-12) {
            est.upper = top;
            est.completion = x;
        }
    }
    est
}

pub fn max_norm_oracle(z: &DenseMat) -> MaxNormEstimate {
    max_norm_bracket(z, 1e-9, 100_000)
}

fn max_diag(x: &DenseSym) -> f64 {
    (0..x.n).map(|i| x.get(i, i)).map(|v| if v.is_nan() { f64::INFINITY } else { v }).fold(0.0, f64::max)
}

/// Witness for the max-norm characterization at `(z, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum MaxNormWitness {
    /// PSD `X` with `Z` block `z` and diagonal at most `t`.
    Feasible(DenseSym),
    /// PSD `Y = (D1 -B; -B^T D2)` with `D1, D2` diagonal of unit total trace
    /// and `2 <z, B> > t`: then `X • Y >= 0` rules out every feasible `X`.
    Infeasible { y: DenseSym, value: f64 },
}

/// Margin by which [`maxnorm_sdp_witness`] tightens the diagonal bound.
pub const POCS_MARGIN: f64 = 5e-4;

/// Decides whether some PSD `X` with diagonal at most `t` has `Z` block `z`.
///
/// Alternating projections between the PSD cone and the affine set
/// `{Z block = z, X_ii <= t - eta}` look for a completion; once the affine
/// iterate has `lambda_min >= -eta`, adding `eta I` gives a feasible `X`.
/// Failing that, the completion and the separating `Y` found by
/// [`max_norm_oracle`] are tried. Every returned witness is checked with the
/// dense eigensolver; `None` means neither was found.
pub fn maxnorm_sdp_witness(z: &DenseMat, t: f64, max_rounds: usize) -> Option<MaxNormWitness> {
    let (m, n) = (z.rows, z.cols);
    let emb = BlockEmbedding::new(m, n);
    let total = m + n;
    let eta = POCS_MARGIN.min(0.5 * t);
    let cap = t - eta;
    let mut a = DenseSym::identity(total).scaled(cap);
    emb.set_z_block(&mut a, z);
    for _ in 0..max_rounds {
        let e = eigen::dense_eig(&a);
        if e.min() >= -eta {
            let mut x = a.clone();
            for i in 0..total {
                x.data[i * total + i] += eta;
            }
            if max_diag(&x) <= t && crate::matrix::is_psd(&x, 1e-12) {
                return Some(MaxNormWitness::Feasible(x));
            }
        }
        // Project onto the PSD cone, then back onto the affine set.
        let mut p = e.apply_fn(|l| l.max(0.0));
        emb.set_z_block(&mut p, z);
        for i in 0..total {
            let v = p.get(i, i).min(cap);
            p.data[i * total + i] = v;
        }
        if p.max_abs_diff(&a) <= 1e-15 {
            break;
        }
        a = p;
    }
    let est = max_norm_oracle(z);
    if est.upper <= t * (1.0 + 1e-12) && crate::matrix::is_psd(&est.completion, 1e-12) {
        return Some(MaxNormWitness::Feasible(est.completion));
    }
    let y = dual_certificate(z, &est.weights);
    let value = 2.0 * (0..m).map(|i| (0..n).map(|j| -y.get(i, m + j) * z.get(i, j)).sum::<f64>()).sum::<f64>();
    (value > t * (1.0 + 1e-12) && crate::matrix::is_psd(&y, 1e-12)).then_some(MaxNormWitness::Infeasible { y, value })
}

pub fn maxnorm_sdp_feasible(z: &DenseMat, t: f64) -> Option<bool> {
    maxnorm_sdp_witness(z, t, 20_000).map(|w| matches!(w, MaxNormWitness::Feasible(_)))
}

fn weighted_completion(z: &DenseMat, d: &[f64]) -> (DenseSym, f64) {
    let (m, n) = (z.rows, z.cols);
    let (d1, d2) = d.split_at(m);
    let mm = DenseMat::from_fn(m, n, |i, j| d1[i].sqrt() * z.get(i, j) * d2[j].sqrt());
    let svd = thin_svd(&mm);
    let top = svd.left_gram(|s| s);
    let bot = svd.right_gram(|s| s);
    let cost = 2.0 * svd.s.iter().sum::<f64>();
    let total = m + n;
    let mut x = DenseSym::zeros(total);
    for i in 0..m {
        for j in 0..m {
            x.data[i * total + j] = top.get(i, j) / (d1[i].sqrt() * d1[j].sqrt());
        }
    }
    for i in 0..n {
        for j in 0..n {
            x.data[(m + i) * total + m + j] = bot.get(i, j) / (d2[i].sqrt() * d2[j].sqrt());
        }
    }
    BlockEmbedding::new(m, n).set_z_block(&mut x, z);
    (x, cost)
}

fn dual_certificate(z: &DenseMat, d: &[f64]) -> DenseSym {
    let (m, n) = (z.rows, z.cols);
    let (d1, d2) = d.split_at(m);
    let mm = DenseMat::from_fn(m, n, |i, j| d1[i].sqrt() * z.get(i, j) * d2[j].sqrt());
    let u = polar_factor(&mm);
    let b = DenseMat::from_fn(m, n, |i, j| -d1[i].sqrt() * u.get(i, j) * d2[j].sqrt());
    let mut y = DenseSym::diag(d);
    BlockEmbedding::new(m, n).set_z_block(&mut y, &b);
    y
}
