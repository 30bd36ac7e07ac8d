use std::sync::Arc;

use super::data::Rating;
use crate::fw::Objective;
use crate::linalg::{BipartiteOp, SymOp};
use crate::matrix::PsdCache;

/// The `Z` block of a spectahedron iterate, stored only at the training
/// pairs followed by the test pairs.
///
/// A rank-one step `X <- (1 - a) X + a t v v^T` costs one pass over the
/// stored pairs: `Z_ij <- (1 - a) Z_ij + a t v_i v_(m+j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionStore {
    pub m: usize,
    pub n: usize,
    pub pairs: Arc<[(u32, u32)]>,
    pub n_train: usize,
    pub values: Vec<f64>,
}

impl PredictionStore {
    pub fn zeros(m: usize, n: usize, train: &[Rating], test: &[Rating]) -> Self {
        let pairs: Arc<[(u32, u32)]> = train.iter().chain(test).map(|e| (e.0, e.1)).collect();
        Self { m, n, values: vec![0.0; pairs.len()], pairs, n_train: train.len() }
    }

    pub fn train_values(&self) -> &[f64] {
        &self.values[..self.n_train]
    }

    pub fn test_values(&self) -> &[f64] {
        &self.values[self.n_train..]
    }

    /// `t v_i v_(m+j)` at pair `(i, j)`.
    pub fn rank_one_entry(&self, t: f64, v: &[f64], i: u32, j: u32) -> f64 {
        t * v[i as usize] * v[self.m + j as usize]
    }

    /// Largest deviation from `(L R^T)_ij` over the stored pairs.
    pub fn max_factor_error(&self, l: &crate::linalg::DenseMat, r: &crate::linalg::DenseMat) -> f64 {
        self.pairs
            .iter()
            .zip(&self.values)
            .map(|(&(i, j), x)| (crate::linalg::dot(l.row(i as usize), r.row(j as usize)) - x).abs())
            .fold(0.0, f64::max)
    }

    fn matches(&self, b: &BipartiteOp) -> bool {
        b.m == self.m
            && b.n == self.n
            && b.entries.len() == self.n_train
            && b.entries.iter().zip(self.pairs.iter()).all(|(e, p)| e.0 == p.0 && e.1 == p.1)
    }
}

impl PsdCache for PredictionStore {
    fn rank_one_like(&self, t: f64, v: &[f64]) -> Self {
        let values = self.pairs.iter().map(|&(i, j)| self.rank_one_entry(t, v, i, j)).collect();
        Self { values, ..self.clone() }
    }

    fn blend_rank_one(&mut self, alpha: f64, t: f64, v: &[f64]) {
        let m = self.m;
        for (x, &(i, j)) in self.values.iter_mut().zip(self.pairs.iter()) {
            *x = (1.0 - alpha) * *x + alpha * t * v[i as usize] * v[m + j as usize];
        }
    }

    /// Only gradients supported on the training pairs can be paired with
    /// the store; anything else gives NaN, which the solver rejects.
    fn inner(&self, grad: &SymOp) -> f64 {
        match grad {
            SymOp::Bipartite(b) if self.matches(b) => {
                2.0 * b.scale * b.entries.iter().zip(&self.values).map(|(e, x)| e.2 * x).sum::<f64>()
            }
            _ => f64::NAN,
        }
    }

    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `f(X) = 1/2 sum_(ij in train) (Z_ij - y_ij)^2` for the `Z` block of `X`.
///
/// The gradient is the bipartite operator `(0 G; G^T 0) / 2` with
/// `G_ij = Z_ij - y_ij` on the training pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredLoss {
    pub m: usize,
    pub n: usize,
    pub train: Arc<[Rating]>,
    pub t: f64,
}

impl SquaredLoss {
    pub fn new(m: usize, n: usize, train: &[Rating], t: f64) -> Self {
        Self { m, n, train: train.into(), t }
    }
}

impl Objective<PredictionStore, SymOp> for SquaredLoss {
    fn value(&self, x: &PredictionStore) -> f64 {
        0.5 * self.train.iter().zip(x.train_values()).map(|(e, z)| (z - e.2).powi(2)).sum::<f64>()
    }

    fn gradient(&self, x: &PredictionStore) -> SymOp {
        let entries = self.train.iter().zip(x.train_values()).map(|(e, z)| (e.0, e.1, z - e.2)).collect();
        SymOp::Bipartite(BipartiteOp::new(self.m, self.n, entries, 0.5))
    }

    /// `||Z_S - Z_X||_F <= ||Z_S||_nuc + ||Z_X||_nuc <= t` on the trace-`t`
    /// spectahedron.
    fn curvature_bound(&self) -> Option<f64> {
        Some(self.t * self.t)
    }

    fn nnz_hint(&self) -> Option<usize> {
        Some(self.train.len())
    }

    fn line_search(&self, x: &PredictionStore, s: &PredictionStore) -> Option<f64> {
        let (num, den) = alpha_terms(self.train.iter().zip(x.train_values().iter().zip(s.train_values())).map(|(e, (&xv, &sv))| (e.2, xv, sv)));
        (den > 0.0).then(|| num / den)
    }
}

fn alpha_terms(items: impl Iterator<Item = (f64, f64, f64)>) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for (y, x, s) in items {
        let d = x - s;
        num += (x - y) * d;
        den += d * d;
    }
    (num, den)
}

/// Exact step toward `t v v^T` for the squared loss:
/// `sum (X_ij - y_ij)(X_ij - S_ij) / sum (X_ij - S_ij)^2` over the training
/// pairs with `S_ij = t v_i v_(m+j)`, clamped to `[0, 1]`; zero when the
/// denominator vanishes.
pub fn closed_form_alpha(store: &PredictionStore, ratings: &[Rating], v: &[f64], t: f64) -> f64 {
    let (num, den) = alpha_terms(
        ratings
            .iter()
            .zip(store.train_values())
            .map(|(e, &x)| (e.2, x, store.rank_one_entry(t, v, e.0, e.1))),
    );
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Unclamped form of [`closed_form_alpha`], `None` for a zero denominator.
pub fn closed_form_alpha_raw(store: &PredictionStore, ratings: &[Rating], v: &[f64], t: f64) -> Option<f64> {
    let (num, den) = alpha_terms(
        ratings
            .iter()
            .zip(store.train_values())
            .map(|(e, &x)| (e.2, x, store.rank_one_entry(t, v, e.0, e.1))),
    );
    (den > 0.0).then(|| num / den)
}
