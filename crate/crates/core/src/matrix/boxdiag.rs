use super::is_psd;
use crate::eigen;
use crate::error::Result;
use crate::fw::{fw_run, Domain, FwOptions, FwResult, LinearMin, LmoRequest, Objective, Start, StepSchedule, Stop};
use crate::linalg::{DenseMat, DenseSym, SymOp, SymmetricOperator};
use crate::rng::{self, FwRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxLmoConfig {
    pub iters: usize,
    pub restarts: usize,
}

impl Default for BoxLmoConfig {
    fn default() -> Self {
        Self { iters: 500, restarts: 5 }
    }
}

/// Atom of the bounded-diagonal box: a PSD matrix with `X_ii <= t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxAtom {
    pub x: DenseSym,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxLmo {
    pub atom: BoxAtom,
    pub value: f64,
    /// Certified lower bound on `min_Y Y • A` over the box.
    pub lower_bound: f64,
}

/// `min Y • A` over `{Y >= 0, Y_ii <= t}`.
///
/// Projected gradient on a square factor `V` (`Y = V V^T`, rows clipped to
/// norm `sqrt(t)`), best of several random restarts and of `Y = 0`. The
/// lower bound comes from the multipliers `mu` read off the final factor:
/// `-t sum(mu) + n t min(0, lambda_min(A + diag(mu)))`.
pub fn boundeddiag_lmo(a: &DenseSym, t: f64, cfg: &BoxLmoConfig, rng: &mut FwRng) -> BoxLmo {
    let n = a.n;
    let fro = a.frob_norm_sq().sqrt();
    let mut best = (0.0, DenseMat::zeros(n, n));
    if fro > 0.0 {
        let step = 1.0 / (2.0 * fro);
        for _ in 0..cfg.restarts {
            let mut v = DenseMat::from_rows(n, n, rng::gaussian_vec(rng, n * n));
            project_rows(&mut v, t);
            for _ in 0..cfg.iters {
                let av = dense_sym_mul(a, &v);
                for (x, g) in v.data.iter_mut().zip(&av.data) {
                    *x -= step * 2.0 * g;
                }
                project_rows(&mut v, t);
            }
            let value = factor_value(a, &v);
            if value < best.0 {
                best = (value, v);
            }
        }
    }
    let (value, v) = best;
    let lower_bound = dual_bound(a, &v, t);
    let x = DenseSym::from_fn(n, |i, j| crate::linalg::dot(v.row(i), v.row(j)));
    BoxLmo { atom: BoxAtom { x }, value, lower_bound: lower_bound.min(value) }
}

fn dense_sym_mul(a: &DenseSym, v: &DenseMat) -> DenseMat {
    DenseMat::from_rows(a.n, a.n, a.data.clone()).matmul(v)
}

fn project_rows(v: &mut DenseMat, t: f64) {
    let r = t.sqrt();
    for i in 0..v.rows {
        let row = &mut v.data[i * v.cols..(i + 1) * v.cols];
        let norm = crate::linalg::norm2(row);
        if norm > r {
            row.iter_mut().for_each(|x| *x *= r / norm);
        }
    }
}

fn factor_value(a: &DenseSym, v: &DenseMat) -> f64 {
    dense_sym_mul(a, v).frob_inner(v)
}

fn dual_bound(a: &DenseSym, v: &DenseMat, t: f64) -> f64 {
    let n = a.n;
    let av = dense_sym_mul(a, v);
    let mu: Vec<f64> = (0..n)
        .map(|i| {
            let row_sq = crate::linalg::dot(v.row(i), v.row(i));
            if row_sq > 0.0 {
                (-crate::linalg::dot(av.row(i), v.row(i)) / row_sq).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    let mut shifted = a.clone();
    for (i, m) in mu.iter().enumerate() {
        shifted.data[i * n + i] += m;
    }
    let lam = eigen::lambda_min(&shifted);
    -t * mu.iter().sum::<f64>() + n as f64 * t * lam.min(0.0)
}

/// `{X >= 0, X_ii <= t}`
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedDiag {
    pub n: usize,
    pub t: f64,
    pub cfg: BoxLmoConfig,
}

impl BoundedDiag {
    pub fn new(n: usize, t: f64) -> Self {
        assert!(n > 0 && t > 0.0);
        Self { n, t, cfg: BoxLmoConfig::default() }
    }

    /// `max ||X - Y||_F^2 = 2 n^2 t^2`, attained by `t 11^T` and `t ss^T`
    /// with `s` an alternating sign vector.
    pub fn diameter_sq(&self) -> f64 {
        2.0 * (self.n * self.n) as f64 * self.t * self.t
    }
}

impl Domain for BoundedDiag {
    type Point = DenseSym;
    type Grad = SymOp;
    type Atom = BoxAtom;

    fn lmo(&self, grad: &SymOp, _req: &LmoRequest, rng: &mut FwRng) -> Result<LinearMin<BoxAtom>> {
        crate::error::ensure_dim(self.n, grad.dim())?;
        let r = boundeddiag_lmo(&grad.to_dense(), self.t, &self.cfg, rng);
        Ok(LinearMin { atom: r.atom, value: r.value, slack: (r.value - r.lower_bound).max(0.0), matvecs: 0 })
    }

    fn inner(&self, x: &DenseSym, grad: &SymOp) -> f64 {
        grad.frob_inner_dense(x)
    }

    fn atom_value(&self, atom: &BoxAtom, grad: &SymOp) -> f64 {
        grad.frob_inner_dense(&atom.x)
    }

    fn atom_point(&self, atom: &BoxAtom) -> DenseSym {
        atom.x.clone()
    }

    fn origin(&self) -> Option<DenseSym> {
        Some(DenseSym::zeros(self.n))
    }

    fn blend(&self, x: &mut DenseSym, alpha: f64, atom: &BoxAtom) {
        x.blend(alpha, &atom.x);
    }

    fn describe(&self, atom: &BoxAtom) -> String {
        format!("box(tr={:.6})", atom.x.trace())
    }

    fn contains(&self, x: &DenseSym) -> bool {
        x.n == self.n && (0..self.n).all(|i| x.get(i, i) <= self.t * (1.0 + 1e-12)) && is_psd(x, 1e-10)
    }

    fn max_abs_diff(&self, a: &DenseSym, b: &DenseSym) -> f64 {
        a.max_abs_diff(b)
    }
}

/// Frank-Wolfe over the bounded-diagonal box from `X = 0`, stopping once the
/// gap plus the oracle's dual slack drops to `eps`.
pub fn maxdiag_run<O>(objective: &O, domain: &BoundedDiag, eps: f64, max_iters: usize, seed: u64) -> Result<FwResult<BoundedDiag>>
where
    O: Objective<DenseSym, SymOp> + ?Sized,
{
    let opts = FwOptions::new(StepSchedule::Harmonic, Stop::gap(eps, max_iters)).seed(seed);
    fw_run(objective, domain, Start::Origin, &opts)
}
