use crate::error::{FwError, Result};
use crate::fw::{fw_run, Domain, FwOptions, FwResult, LinearMin, LmoRequest, Objective, Start, StepSchedule, Stop};
use crate::linalg::{DenseSym, SymOp, SymmetricOperator};
use crate::rng::FwRng;

/// `P_ij = (e_i + e_j)(e_i + e_j)^T` when `plus`, else `N_ij` with `e_i - e_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparsePsdAtom {
    pub i: usize,
    pub j: usize,
    pub plus: bool,
}

impl SparsePsdAtom {
    pub fn to_dense(&self, n: usize) -> DenseSym {
        let mut x = DenseSym::zeros(n);
        x.set(self.i, self.i, 1.0);
        x.set(self.j, self.j, 1.0);
        x.set(self.i, self.j, if self.plus { 1.0 } else { -1.0 });
        x
    }

    /// `<atom, G> = G_ii + G_jj +- 2 G_ij`
    pub fn value(&self, g: &DenseSym) -> f64 {
        let off = 2.0 * g.get(self.i, self.j);
        g.get(self.i, self.i) + g.get(self.j, self.j) + if self.plus { off } else { -off }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparseMode {
    Both,
    Plus,
    Minus,
}

/// Scan over all admissible atoms; lowest `(i, j)` wins ties, `P` before `N`.
pub fn sparsepsd_lmo(g: &DenseSym, mode: SparseMode) -> Result<(SparsePsdAtom, f64)> {
    let n = g.n;
    if n < 2 {
        return Err(FwError::Lmo("sparse PSD atoms need n >= 2".into()));
    }
    let signs: &[bool] = match mode {
        SparseMode::Both => &[true, false],
        SparseMode::Plus => &[true],
        SparseMode::Minus => &[false],
    };
    let mut best: Option<(SparsePsdAtom, f64)> = None;
    for i in 0..n {
        for j in i + 1..n {
            for &plus in signs {
                let atom = SparsePsdAtom { i, j, plus };
                let v = atom.value(g);
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((atom, v));
                }
            }
        }
    }
    Ok(best.expect("n >= 2"))
}

/// Convex hull of the sparse PSD atoms allowed by `mode`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparsePsd {
    pub n: usize,
    pub mode: SparseMode,
}

impl SparsePsd {
    pub fn new(n: usize, mode: SparseMode) -> Self {
        Self { n, mode }
    }

    pub fn first_atom(&self) -> SparsePsdAtom {
        SparsePsdAtom { i: 0, j: 1, plus: self.mode != SparseMode::Minus }
    }
}

impl Domain for SparsePsd {
    type Point = DenseSym;
    type Grad = SymOp;
    type Atom = SparsePsdAtom;

    fn lmo(&self, grad: &SymOp, _req: &LmoRequest, _rng: &mut FwRng) -> Result<LinearMin<SparsePsdAtom>> {
        crate::error::ensure_dim(self.n, grad.dim())?;
        let (atom, value) = sparsepsd_lmo(&grad.to_dense(), self.mode)?;
        Ok(LinearMin::exact(atom, value))
    }

    fn inner(&self, x: &DenseSym, grad: &SymOp) -> f64 {
        grad.frob_inner_dense(x)
    }

    fn atom_value(&self, atom: &SparsePsdAtom, grad: &SymOp) -> f64 {
        match grad {
            SymOp::Dense(g) => atom.value(g),
            other => other.frob_inner_dense(&atom.to_dense(self.n)),
        }
    }

    fn atom_point(&self, atom: &SparsePsdAtom) -> DenseSym {
        atom.to_dense(self.n)
    }

    fn blend(&self, x: &mut DenseSym, alpha: f64, atom: &SparsePsdAtom) {
        x.data.iter_mut().for_each(|v| *v *= 1.0 - alpha);
        let n = self.n;
        let off = if atom.plus { alpha } else { -alpha };
        x.data[atom.i * n + atom.i] += alpha;
        x.data[atom.j * n + atom.j] += alpha;
        x.data[atom.i * n + atom.j] += off;
        x.data[atom.j * n + atom.i] += off;
    }

    fn describe(&self, atom: &SparsePsdAtom) -> String {
        format!("{}{},{}", if atom.plus { 'P' } else { 'N' }, atom.i, atom.j)
    }

    fn contains(&self, x: &DenseSym) -> bool {
        // Every member is PSD with trace 2 and diagonally dominant.
        let n = self.n;
        (x.trace() - 2.0).abs() <= 1e-9
            && (0..n).all(|i| x.get(i, i) + 1e-12 >= (0..n).filter(|&j| j != i).map(|j| x.get(i, j).abs()).sum::<f64>())
    }

    fn max_abs_diff(&self, a: &DenseSym, b: &DenseSym) -> f64 {
        a.max_abs_diff(b)
    }

    fn same_atom(&self, a: &SparsePsdAtom, b: &SparsePsdAtom) -> bool {
        a == b
    }
}

/// Frank-Wolfe over the sparse PSD hull from the first admissible atom.
pub fn sparsepsd_run<O>(objective: &O, domain: &SparsePsd, eps: f64, max_iters: usize) -> Result<FwResult<SparsePsd>>
where
    O: Objective<DenseSym, SymOp> + ?Sized,
{
    let opts = FwOptions::new(StepSchedule::Harmonic, Stop::gap(eps, max_iters));
    fw_run(objective, domain, Start::Atom(domain.first_atom()), &opts)
}
