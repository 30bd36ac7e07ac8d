//! Approximate extreme eigenvectors and a dense reference eigensolver.
//!
//! The power method runs on the shifted operator `M + shift * I`, which is
//! positive semidefinite once `shift >= ||M||`. For an additive accuracy
//! `eps` and a spectral range bound `L`, it performs
//! `ceil(c * ln(n) * L / eps)` multiplications. Lanczos is available as a
//! faster alternative with `ceil(c_lanczos * ln(n) * sqrt(L / eps))` steps.

use crate::error::{FwError, Result};
use crate::linalg::{axpy, dot, norm2, normalize, DenseMat, DenseSym, SymmetricOperator};
use crate::rng::{self, FwRng};

pub const DEFAULT_POWER_CONSTANT: f64 = 8.0;
pub const DEFAULT_LANCZOS_CONSTANT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EigResult {
    pub v: Vec<f64>,
    /// `v^T M v` for the unshifted operator.
    pub rayleigh: f64,
    pub iterations: usize,
    pub matvecs: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartVector {
    /// Uniform on the unit sphere.
    Random,
    /// `(1, ..., 1) / sqrt(n)`
    Uniform,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigMethod {
    Power,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigOptions {
    pub method: EigMethod,
    pub start: StartVector,
    /// Constant in the iteration count.
    pub constant: f64,
    /// Diagonal shift; defaults to `L / 2`.
    pub shift: Option<f64>,
    /// Fixed iteration count, overriding the accuracy-based one.
    pub iterations: Option<usize>,
    /// With no explicit `shift`, take `factor * ||M v0||` from the first
    /// product instead of `L / 2`.
    pub shift_from_start: Option<f64>,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            method: EigMethod::Power,
            start: StartVector::Random,
            constant: DEFAULT_POWER_CONSTANT,
            shift: None,
            iterations: None,
            shift_from_start: None,
        }
    }
}

impl EigOptions {
    pub fn lanczos() -> Self {
        Self { method: EigMethod::Lanczos, constant: DEFAULT_LANCZOS_CONSTANT, ..Self::default() }
    }
}

/// `2 * min(||M||_F, max_i sum_j |M_ij|)`, an upper bound on
/// `lambda_max - lambda_min`.
pub fn spectral_range_bound(m: &(impl SymmetricOperator + ?Sized)) -> f64 {
    let fro = m.frobenius_norm();
    2.0 * m.max_abs_row_sum().map_or(fro, |r| r.min(fro))
}

/// Power iterations needed for additive accuracy `eps` given range `l`.
pub fn power_iterations(n: usize, eps: f64, l: f64, constant: f64) -> usize {
    if l <= 0.0 {
        return 1;
    }
    let gamma = eps / l;
    ((constant * (n.max(2) as f64).ln() / gamma).ceil() as usize).max(1)
}

pub fn lanczos_steps(n: usize, eps: f64, l: f64, constant: f64) -> usize {
    if l <= 0.0 {
        return 1;
    }
    let gamma = eps / l;
    ((constant * (n.max(2) as f64).ln() / gamma.sqrt()).ceil() as usize).clamp(1, n.max(1))
}

fn start_vector(start: &StartVector, n: usize, rng: &mut FwRng) -> Result<Vec<f64>> {
    let mut v = match start {
        StartVector::Random => rng::unit_sphere(rng, n),
        StartVector::Uniform => vec![1.0 / (n as f64).sqrt(); n],
        StartVector::Given(v) => {
            crate::error::ensure_dim(n, v.len())?;
            v.clone()
        }
    };
    if normalize(&mut v) == 0.0 {
        return Err(FwError::InvalidInput("zero start vector".into()));
    }
    Ok(v)
}

struct Signed<'a, M: ?Sized> {
    m: &'a M,
    sign: f64,
}

impl<M: SymmetricOperator + ?Sized> Signed<'_, M> {
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.m.apply(x, y);
        if self.sign < 0.0 {
            y.iter_mut().for_each(|v| *v = -*v);
        }
        if y.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(FwError::NonFinite { what: "matrix-vector product", k: 0 })
        }
    }
}

/// Unit `v` with `v^T M v >= lambda_max(M) - eps` (with high probability).
pub fn approx_largest_ev(m: &(impl SymmetricOperator + ?Sized), eps: f64, l: f64, rng: &mut FwRng) -> Result<EigResult> {
    approx_largest_ev_with(m, eps, l, &EigOptions::default(), rng)
}

/// Unit `v` with `v^T M v <= lambda_min(M) + eps` (with high probability).
pub fn approx_smallest_ev(m: &(impl SymmetricOperator + ?Sized), eps: f64, l: f64, rng: &mut FwRng) -> Result<EigResult> {
    approx_smallest_ev_with(m, eps, l, &EigOptions::default(), rng)
}

pub fn approx_largest_ev_with(
    m: &(impl SymmetricOperator + ?Sized),
    eps: f64,
    l: f64,
    opts: &EigOptions,
    rng: &mut FwRng,
) -> Result<EigResult> {
    extreme_ev(&Signed { m, sign: 1.0 }, eps, l, opts, rng)
}

pub fn approx_smallest_ev_with(
    m: &(impl SymmetricOperator + ?Sized),
    eps: f64,
    l: f64,
    opts: &EigOptions,
    rng: &mut FwRng,
) -> Result<EigResult> {
    let mut r = extreme_ev(&Signed { m, sign: -1.0 }, eps, l, opts, rng)?;
    r.rayleigh = -r.rayleigh;
    Ok(r)
}

fn extreme_ev<M: SymmetricOperator + ?Sized>(
    op: &Signed<'_, M>,
    eps: f64,
    l: f64,
    opts: &EigOptions,
    rng: &mut FwRng,
) -> Result<EigResult> {
    if opts.iterations.is_none() && !(eps > 0.0) {
        return Err(FwError::InvalidInput(format!("eigen tolerance must be positive, got {eps}")));
    }
    let n = op.m.dim();
    if n == 0 {
        return Err(FwError::InvalidInput("empty operator".into()));
    }
    let v0 = start_vector(&opts.start, n, rng)?;
    match opts.method {
        EigMethod::Power => {
            let iters = opts.iterations.unwrap_or_else(|| power_iterations(n, eps, l, opts.constant));
            let shift = match (opts.shift, opts.shift_from_start) {
                (Some(s), _) => Shift::Fixed(s),
                (None, Some(factor)) => Shift::FromStart(factor),
                (None, None) => Shift::Fixed(0.5 * l),
            };
            power(op, v0, iters, shift)
        }
        EigMethod::Lanczos => {
            let steps = opts.iterations.unwrap_or_else(|| lanczos_steps(n, eps, l, opts.constant));
            lanczos(op, v0, steps)
        }
    }
}

enum Shift {
    Fixed(f64),
    FromStart(f64),
}

fn power<M: SymmetricOperator + ?Sized>(op: &Signed<'_, M>, mut v: Vec<f64>, iters: usize, shift: Shift) -> Result<EigResult> {
    let n = v.len();
    let mut y = vec![0.0; n];
    let mut matvecs = 0u64;
    let mut shift_value = match shift {
        Shift::Fixed(s) => Some(s),
        Shift::FromStart(_) => None,
    };
    for _ in 0..iters {
        op.apply(&v, &mut y)?;
        matvecs += 1;
        let s = *shift_value.get_or_insert_with(|| match shift {
            Shift::FromStart(factor) => factor * norm2(&y),
            Shift::Fixed(s) => s,
        });
        axpy(s, &v, &mut y);
        if normalize(&mut y) == 0.0 {
            // v lies in the kernel of the shifted operator; it is extreme already.
            break;
        }
        std::mem::swap(&mut v, &mut y);
    }
    op.apply(&v, &mut y)?;
    matvecs += 1;
    Ok(EigResult { rayleigh: dot(&v, &y), v, iterations: iters, matvecs })
}

fn lanczos<M: SymmetricOperator + ?Sized>(op: &Signed<'_, M>, v0: Vec<f64>, steps: usize) -> Result<EigResult> {
    let n = v0.len();
    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut matvecs = 0u64;
    for j in 0..steps {
        op.apply(&basis[j], &mut w)?;
        matvecs += 1;
        let a = dot(&w, &basis[j]);
        alphas.push(a);
        // Full reorthogonalization, twice for stability.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                axpy(-c, q, &mut w);
            }
        }
        if j + 1 == steps {
            break;
        }
        let b = normalize(&mut w);
        if b <= 1e-12 * (a.abs() + betas.last().copied().unwrap_or(0.0)).max(1e-300) {
            break;
        }
        betas.push(b);
        basis.push(w.clone());
    }
    let k = alphas.len();
    let mut tri = DenseSym::zeros(k);
    for i in 0..k {
        tri.set(i, i, alphas[i]);
        if i + 1 < k {
            tri.set(i, i + 1, betas[i]);
        }
    }
    let eig = dense_eig(&tri);
    let mut v = vec![0.0; n];
    for (i, q) in basis.iter().take(k).enumerate() {
        axpy(eig.vectors.get(i, 0), q, &mut v);
    }
    normalize(&mut v);
    op.apply(&v, &mut w)?;
    matvecs += 1;
    Ok(EigResult { rayleigh: dot(&v, &w), v, iterations: k, matvecs })
}

/// Full eigendecomposition; eigenvalues descending, eigenvectors are the
/// columns of `vectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseEig {
    pub values: Vec<f64>,
    pub vectors: DenseMat,
    pub sweeps: usize,
}

impl DenseEig {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        (0..self.vectors.rows).map(|r| self.vectors.get(r, i)).collect()
    }

    pub fn min(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    /// `V diag(g(lambda)) V^T`
    pub fn apply_fn(&self, g: impl Fn(f64) -> f64) -> DenseSym {
        let n = self.values.len();
        let gl: Vec<f64> = self.values.iter().map(|&l| g(l)).collect();
        DenseSym::from_fn(n, |i, j| (0..n).map(|k| self.vectors.get(i, k) * gl[k] * self.vectors.get(j, k)).sum())
    }
}

/// Off-diagonal Frobenius mass at which the Jacobi sweeps stop, relative to
/// `max(1, ||M||_F)`.
pub const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver for small dense symmetric matrices.
pub fn dense_eig(m: &DenseSym) -> DenseEig {
    let n = m.n;
    let mut a = m.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let threshold = JACOBI_TOL * m.frob_norm_sq().sqrt().max(1.0);
    let off = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS && off(&a) > threshold {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = DenseMat::from_fn(n, n, |r, c| v[r * n + order[c]]);
    DenseEig { values, vectors, sweeps }
}

pub fn lambda_min(m: &DenseSym) -> f64 {
    if m.n == 0 {
        return 0.0;
    }
    dense_eig(m).min()
}

pub fn lambda_max(m: &DenseSym) -> f64 {
    if m.n == 0 {
        return 0.0;
    }
    dense_eig(m).max()
}

/// Spectral norm of a dense symmetric matrix.
pub fn spectral_norm(m: &DenseSym) -> f64 {
    let e = dense_eig(m);
    e.max().abs().max(e.min().abs())
}
