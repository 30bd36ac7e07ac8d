//! Vector domains: the unit simplex, the l1 ball of radius `t`, and the
//! unit cube `[-1, 1]^n`, together with a few test objectives.
//!
//! Every `argmin`/`argmax` breaks ties toward the lowest index, and the sign
//! of a zero coordinate is taken as `+1`.

use crate::error::Result;
use crate::fw::{Domain, LinearMin, LmoRequest, Objective};
use crate::linalg::{dot, norm1, norm_inf, DenseMat, DenseSym, SymmetricOperator};
use crate::rng::{self, FwRng};

fn sign_of_neg(c: f64) -> f64 {
    if c > 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Lowest index of the smallest entry.
pub fn simplex_lmo(c: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in c.iter().enumerate() {
        if v < c[best] {
            best = i;
        }
    }
    best
}

/// `x^T g - min_i g_i`
pub fn simplex_gap(x: &[f64], grad: &[f64]) -> f64 {
    dot(x, grad) - grad[simplex_lmo(grad)]
}

/// Vertex `sign * t * e_index` of the l1 ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedCoord {
    pub index: usize,
    pub sign: f64,
}

/// Lowest index of the largest `|c_i|`, with sign of `-c_i`.
pub fn l1_lmo(c: &[f64]) -> SignedCoord {
    let mut best = 0;
    for (i, &v) in c.iter().enumerate() {
        if v.abs() > c[best].abs() {
            best = i;
        }
    }
    SignedCoord { index: best, sign: sign_of_neg(c[best]) }
}

/// `t ||g||_inf + x^T g`
pub fn l1_gap(t: f64, x: &[f64], grad: &[f64]) -> f64 {
    t * norm_inf(grad) + dot(x, grad)
}

/// Sign vector of `-c`.
pub fn cube_lmo(c: &[f64]) -> Vec<f64> {
    c.iter().map(|&v| sign_of_neg(v)).collect()
}

/// `||g||_1 + x^T g`
pub fn cube_gap(x: &[f64], grad: &[f64]) -> f64 {
    norm1(grad) + dot(x, grad)
}

fn blend_vec(x: &mut [f64], alpha: f64, s: &[f64]) {
    let beta = 1.0 - alpha;
    for (xi, si) in x.iter_mut().zip(s) {
        *xi = beta * *xi + alpha * si;
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// `{x >= 0, sum x = 1}`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simplex {
    pub n: usize,
}

impl Simplex {
    pub fn new(n: usize) -> Self {
        assert!(n > 0);
        Self { n }
    }

    pub fn diameter_sq(&self) -> f64 {
        if self.n > 1 {
            2.0
        } else {
            0.0
        }
    }
}

impl Domain for Simplex {
    type Point = Vec<f64>;
    type Grad = Vec<f64>;
    type Atom = usize;

    fn lmo(&self, grad: &Vec<f64>, _req: &LmoRequest, _rng: &mut FwRng) -> Result<LinearMin<usize>> {
        crate::error::ensure_dim(self.n, grad.len())?;
        let i = simplex_lmo(grad);
        Ok(LinearMin::exact(i, grad[i]))
    }

    fn inner(&self, x: &Vec<f64>, grad: &Vec<f64>) -> f64 {
        dot(x, grad)
    }

    fn atom_value(&self, atom: &usize, grad: &Vec<f64>) -> f64 {
        grad[*atom]
    }

    fn atom_point(&self, atom: &usize) -> Vec<f64> {
        let mut e = vec![0.0; self.n];
        e[*atom] = 1.0;
        e
    }

    fn blend(&self, x: &mut Vec<f64>, alpha: f64, atom: &usize) {
        x.iter_mut().for_each(|v| *v *= 1.0 - alpha);
        x[*atom] += alpha;
    }

    fn describe(&self, atom: &usize) -> String {
        format!("e{atom}")
    }

    fn contains(&self, x: &Vec<f64>) -> bool {
        x.len() == self.n && x.iter().all(|&v| v >= 0.0) && (x.iter().sum::<f64>() - 1.0).abs() <= 1e-12
    }

    fn max_abs_diff(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        max_diff(a, b)
    }

    fn same_atom(&self, a: &usize, b: &usize) -> bool {
        a == b
    }
}

/// `{||x||_1 <= t}`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Ball {
    pub n: usize,
    pub t: f64,
}

impl L1Ball {
    pub fn new(n: usize, t: f64) -> Self {
        assert!(n > 0 && t > 0.0);
        Self { n, t }
    }

    pub fn diameter_sq(&self) -> f64 {
        4.0 * self.t * self.t
    }
}

impl Domain for L1Ball {
    type Point = Vec<f64>;
    type Grad = Vec<f64>;
    type Atom = SignedCoord;

    fn lmo(&self, grad: &Vec<f64>, _req: &LmoRequest, _rng: &mut FwRng) -> Result<LinearMin<SignedCoord>> {
        crate::error::ensure_dim(self.n, grad.len())?;
        let a = l1_lmo(grad);
        Ok(LinearMin::exact(a, self.atom_value(&a, grad)))
    }

    fn inner(&self, x: &Vec<f64>, grad: &Vec<f64>) -> f64 {
        dot(x, grad)
    }

    fn atom_value(&self, atom: &SignedCoord, grad: &Vec<f64>) -> f64 {
        self.t * atom.sign * grad[atom.index]
    }

    fn atom_point(&self, atom: &SignedCoord) -> Vec<f64> {
        let mut e = vec![0.0; self.n];
        e[atom.index] = self.t * atom.sign;
        e
    }

    fn origin(&self) -> Option<Vec<f64>> {
        Some(vec![0.0; self.n])
    }

    fn blend(&self, x: &mut Vec<f64>, alpha: f64, atom: &SignedCoord) {
        x.iter_mut().for_each(|v| *v *= 1.0 - alpha);
        x[atom.index] += alpha * self.t * atom.sign;
    }

    fn describe(&self, atom: &SignedCoord) -> String {
        format!("{}e{}", if atom.sign > 0.0 { '+' } else { '-' }, atom.index)
    }

    fn contains(&self, x: &Vec<f64>) -> bool {
        x.len() == self.n && norm1(x) <= self.t * (1.0 + 1e-12)
    }

    fn max_abs_diff(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        max_diff(a, b)
    }

    fn same_atom(&self, a: &SignedCoord, b: &SignedCoord) -> bool {
        a == b
    }
}

/// `{||x||_inf <= 1}`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cube {
    pub n: usize,
}

impl Cube {
    pub fn new(n: usize) -> Self {
        assert!(n > 0);
        Self { n }
    }

    pub fn diameter_sq(&self) -> f64 {
        4.0 * self.n as f64
    }
}

impl Domain for Cube {
    type Point = Vec<f64>;
    type Grad = Vec<f64>;
    type Atom = Vec<f64>;

    fn lmo(&self, grad: &Vec<f64>, _req: &LmoRequest, _rng: &mut FwRng) -> Result<LinearMin<Vec<f64>>> {
        crate::error::ensure_dim(self.n, grad.len())?;
        let s = cube_lmo(grad);
        let v = dot(&s, grad);
        Ok(LinearMin::exact(s, v))
    }

    fn inner(&self, x: &Vec<f64>, grad: &Vec<f64>) -> f64 {
        dot(x, grad)
    }

    fn atom_value(&self, atom: &Vec<f64>, grad: &Vec<f64>) -> f64 {
        dot(atom, grad)
    }

    fn atom_point(&self, atom: &Vec<f64>) -> Vec<f64> {
        atom.clone()
    }

    fn origin(&self) -> Option<Vec<f64>> {
        Some(vec![0.0; self.n])
    }

    fn blend(&self, x: &mut Vec<f64>, alpha: f64, atom: &Vec<f64>) {
        blend_vec(x, alpha, atom);
    }

    fn describe(&self, atom: &Vec<f64>) -> String {
        atom.iter().map(|&s| if s > 0.0 { '+' } else { '-' }).collect()
    }

    fn contains(&self, x: &Vec<f64>) -> bool {
        x.len() == self.n && norm_inf(x) <= 1.0 + 1e-12
    }

    fn max_abs_diff(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        max_diff(a, b)
    }

    fn same_atom(&self, a: &Vec<f64>, b: &Vec<f64>) -> bool {
        a == b
    }
}

fn quadratic_step(slope: f64, curvature: f64) -> Option<f64> {
    (curvature > 0.0).then(|| -slope / curvature)
}

fn diff(s: &[f64], x: &[f64]) -> Vec<f64> {
    s.iter().zip(x).map(|(a, b)| a - b).collect()
}

/// `f(x) = ||x||^2`
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SquaredNorm {
    pub curvature: Option<f64>,
}

impl SquaredNorm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_curvature(c: f64) -> Self {
        Self { curvature: Some(c) }
    }
}

impl Objective<Vec<f64>, Vec<f64>> for SquaredNorm {
    fn value(&self, x: &Vec<f64>) -> f64 {
        dot(x, x)
    }

    fn gradient(&self, x: &Vec<f64>) -> Vec<f64> {
        x.iter().map(|v| 2.0 * v).collect()
    }

    fn curvature_bound(&self) -> Option<f64> {
        self.curvature
    }

    fn line_search(&self, x: &Vec<f64>, s: &Vec<f64>) -> Option<f64> {
        let d = diff(s, x);
        quadratic_step(dot(&d, x), dot(&d, &d))
    }
}

/// `f(x) = ||x - r||^2`
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedSquares {
    pub r: Vec<f64>,
    pub curvature: Option<f64>,
}

impl ShiftedSquares {
    pub fn new(r: Vec<f64>) -> Self {
        Self { r, curvature: None }
    }
}

impl Objective<Vec<f64>, Vec<f64>> for ShiftedSquares {
    fn value(&self, x: &Vec<f64>) -> f64 {
        x.iter().zip(&self.r).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn gradient(&self, x: &Vec<f64>) -> Vec<f64> {
        x.iter().zip(&self.r).map(|(a, b)| 2.0 * (a - b)).collect()
    }

    fn curvature_bound(&self) -> Option<f64> {
        self.curvature
    }

    fn line_search(&self, x: &Vec<f64>, s: &Vec<f64>) -> Option<f64> {
        let d = diff(s, x);
        let res = diff(x, &self.r);
        quadratic_step(dot(&d, &res), dot(&d, &d))
    }
}

/// `f(x) = ||A x - b||^2`
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub a: DenseMat,
    pub b: Vec<f64>,
    pub curvature: Option<f64>,
}

impl LeastSquares {
    pub fn new(a: DenseMat, b: Vec<f64>) -> Self {
        assert_eq!(a.rows, b.len());
        Self { a, b, curvature: None }
    }

    /// Sets `C_f` from `lambda_max(2 A^T A)` and the domain diameter.
    pub fn with_diameter_sq(mut self, diameter_sq: f64) -> Self {
        let lam = crate::eigen::dense_eig(&self.a.gram()).values[0].max(0.0);
        self.curvature = Some(crate::fw::curvature_from_hessian(2.0 * lam, diameter_sq));
        self
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.a.mul_vec(x);
        r.iter_mut().zip(&self.b).for_each(|(v, b)| *v -= b);
        r
    }
}

impl Objective<Vec<f64>, Vec<f64>> for LeastSquares {
    fn value(&self, x: &Vec<f64>) -> f64 {
        let r = self.residual(x);
        dot(&r, &r)
    }

    fn gradient(&self, x: &Vec<f64>) -> Vec<f64> {
        self.a.tr_mul_vec(&self.residual(x)).into_iter().map(|v| 2.0 * v).collect()
    }

    fn curvature_bound(&self) -> Option<f64> {
        self.curvature
    }

    fn nnz_hint(&self) -> Option<usize> {
        Some(self.a.rows * self.a.cols)
    }

    fn line_search(&self, x: &Vec<f64>, s: &Vec<f64>) -> Option<f64> {
        let ad = self.a.mul_vec(&diff(s, x));
        quadratic_step(dot(&ad, &self.residual(x)), dot(&ad, &ad))
    }
}

/// `f(x) = 1/2 x^T Q x + c^T x` with `Q` positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub q: DenseSym,
    pub c: Vec<f64>,
    pub curvature: Option<f64>,
}

impl Quadratic {
    pub fn new(q: DenseSym, c: Vec<f64>) -> Self {
        assert_eq!(q.n, c.len());
        Self { q, c, curvature: None }
    }

    pub fn with_diameter_sq(mut self, diameter_sq: f64) -> Self {
        let lam = crate::eigen::dense_eig(&self.q).values[0].max(0.0);
        self.curvature = Some(crate::fw::curvature_from_hessian(lam, diameter_sq));
        self
    }
}

impl Objective<Vec<f64>, Vec<f64>> for Quadratic {
    fn value(&self, x: &Vec<f64>) -> f64 {
        0.5 * self.q.quadratic_form(x) + dot(&self.c, x)
    }

    fn gradient(&self, x: &Vec<f64>) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.q.apply(x, &mut g);
        g.iter_mut().zip(&self.c).for_each(|(v, c)| *v += c);
        g
    }

    fn curvature_bound(&self) -> Option<f64> {
        self.curvature
    }

    fn line_search(&self, x: &Vec<f64>, s: &Vec<f64>) -> Option<f64> {
        let d = diff(s, x);
        quadratic_step(dot(&d, &self.gradient(x)), self.q.quadratic_form(&d))
    }
}

/// `f(x) = c^T x`
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub c: Vec<f64>,
}

impl Objective<Vec<f64>, Vec<f64>> for Linear {
    fn value(&self, x: &Vec<f64>) -> f64 {
        dot(&self.c, x)
    }

    fn gradient(&self, _x: &Vec<f64>) -> Vec<f64> {
        self.c.clone()
    }

    fn curvature_bound(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Rounding allowance for `||x||^2` of the uniform `k`-sparse vector, in
/// units of `eps / k`. Summing `k` copies of `fl(1/k)^2` is off by an ulp
/// for some `k`.
pub const UNIFORM_ULPS: f64 = 4.0;

/// Outcome of [`sparse_lowerbound_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityReport {
    pub n: usize,
    pub k: usize,
    /// `||x||^2` of the vector with `k` entries equal to `1/k`.
    pub uniform_f: f64,
    pub min_sample_f: f64,
    /// Smallest gap over samples; infinite when `k = n` (no gap bound).
    pub min_sample_gap: f64,
    pub samples: usize,
}

impl SparsityReport {
    pub fn passes(&self) -> bool {
        let k = self.k as f64;
        (self.uniform_f - 1.0 / k).abs() <= UNIFORM_ULPS * f64::EPSILON / k
            && self.min_sample_f >= 1.0 / k - 1e-12
            && (self.k == self.n || self.min_sample_gap >= 2.0 / k - 1e-12)
    }
}

/// Random point of the simplex with at most `k` non-zeros.
pub fn random_sparse_simplex_point(rng: &mut FwRng, n: usize, k: usize) -> Vec<f64> {
    use rand::seq::index::sample;
    use rand::Rng;
    let card = rng.random_range(1..=k);
    let weights = rng::simplex_point(rng, card);
    let mut x = vec![0.0; n];
    for (slot, w) in sample(rng, n, card).into_iter().zip(weights) {
        x[slot] = w;
    }
    x
}

/// Checks the cardinality lower bounds for `||x||^2` on the simplex:
/// `f >= 1/k` and, for `k < n`, `gap >= 2/k` at every `k`-sparse point.
pub fn sparse_lowerbound_suite(n: usize, k: usize, samples: usize, rng: &mut FwRng) -> SparsityReport {
    assert!(1 <= k && k <= n);
    let mut uniform = vec![0.0; n];
    uniform[..k].iter_mut().for_each(|v| *v = 1.0 / k as f64);
    let f = SquaredNorm::new();
    let mut report = SparsityReport {
        n,
        k,
        uniform_f: f.value(&uniform),
        min_sample_f: f64::INFINITY,
        min_sample_gap: f64::INFINITY,
        samples,
    };
    for _ in 0..samples {
        let x = random_sparse_simplex_point(rng, n, k);
        report.min_sample_f = report.min_sample_f.min(f.value(&x));
        if k < n {
            report.min_sample_gap = report.min_sample_gap.min(simplex_gap(&x, &f.gradient(&x)));
        }
    }
    report
}
