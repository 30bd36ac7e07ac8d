//! Matrix domains over symmetric matrices.
//!
//! * [`Spectahedron`]: `{X >= 0, tr X = t}`, with rank-one atoms `t v v^T`
//!   and an eigenvector oracle, driven by [`hazan_run`].
//! * [`BoundedDiag`]: `{X >= 0, X_ii <= t}`, whose oracle is a small
//!   factored max-cut style problem, driven by [`maxdiag_run`].
//! * [`SparsePsd`]: the hull of the two-by-two sparse atoms
//!   `(e_i +- e_j)(e_i +- e_j)^T`, driven by [`sparsepsd_run`].

mod boxdiag;
mod hazan;
mod sparsepsd;
mod spectahedron;

pub use boxdiag::{boundeddiag_lmo, maxdiag_run, BoundedDiag, BoxAtom, BoxLmo, BoxLmoConfig};
pub use hazan::{hazan_run, hazan_run_observed, HazanOptions, HazanStart, PowerBudget, ShiftPolicy};
pub use sparsepsd::{sparsepsd_lmo, sparsepsd_run, SparseMode, SparsePsd, SparsePsdAtom};
pub use spectahedron::{
    factored_dense, factored_inner, spect_gap, spect_lmo, spect_lowrank_lowerbound_suite, FrobeniusDistance,
    LinearSym, PsdCache, RankOne, RankReport, Spectahedron, SquaredFrobenius,
};

use crate::linalg::DenseSym;

/// Whether `x` is PSD up to `-tol * max(1, ||x||_F)` on its eigenvalues.
pub fn is_psd(x: &DenseSym, tol: f64) -> bool {
    x.n == 0 || crate::eigen::lambda_min(x) >= -tol * x.frob_norm_sq().sqrt().max(1.0)
}
