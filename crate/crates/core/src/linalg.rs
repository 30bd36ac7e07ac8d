//! Small dense and sparse linear algebra used by the oracles.
//!
//! Matrices are plain row-major `Vec<f64>` buffers. Symmetric operators are
//! exposed through [`SymmetricOperator`], which is all the eigensolvers need.

use std::collections::BTreeMap;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Normalizes `v` in place and returns its previous norm.
pub fn normalize(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Real symmetric linear map, accessed through matrix-vector products.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;

    /// `y = M x`; `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// Number of stored entries touched by one product.
    fn nnz(&self) -> usize;

    fn frobenius_norm(&self) -> f64;

    /// `max_i sum_j |M_ij|`, when rows can be enumerated cheaply.
    fn max_abs_row_sum(&self) -> Option<f64> {
        None
    }

    fn to_dense(&self) -> DenseSym {
        let n = self.dim();
        let mut out = DenseSym::zeros(n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            for i in 0..n {
                out.data[i * n + j] = col[i];
            }
            e[j] = 0.0;
        }
        out
    }

    fn quadratic_form(&self, v: &[f64]) -> f64 {
        let mut y = vec![0.0; v.len()];
        self.apply(v, &mut y);
        dot(v, &y)
    }
}

/// Dense symmetric matrix with full row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSym {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseSym {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, &x) in d.iter().enumerate() {
            m.data[i * n + i] = x;
        }
        m
    }

    /// Builds from a function of `(i, j)`, evaluated for `i <= j` and mirrored.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    /// Symmetrizes an arbitrary row-major square buffer.
    pub fn from_rows(n: usize, rows: &[f64]) -> Self {
        assert_eq!(rows.len(), n * n);
        Self::from_fn(n, |i, j| 0.5 * (rows[i * n + j] + rows[j * n + i]))
    }

    /// `scale * v v^T`
    pub fn rank_one(v: &[f64], scale: f64) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = scale * v[i] * v[j];
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product `self • other`.
    pub fn frob_inner(&self, other: &DenseSym) -> f64 {
        dot(&self.data, &other.data)
    }

    pub fn frob_norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    /// `self = (1 - alpha) self + alpha * other`
    pub fn blend(&mut self, alpha: f64, other: &DenseSym) {
        let beta = 1.0 - alpha;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = beta * *a + alpha * b;
        }
    }

    /// `self = (1 - alpha) self + alpha * scale * v v^T`
    pub fn blend_rank_one(&mut self, alpha: f64, scale: f64, v: &[f64]) {
        let beta = 1.0 - alpha;
        let n = self.n;
        for i in 0..n {
            let s = alpha * scale * v[i];
            let row = &mut self.data[i * n..(i + 1) * n];
            for (j, x) in row.iter_mut().enumerate() {
                *x = beta * *x + s * v[j];
            }
        }
    }

    pub fn add_scaled(&mut self, a: f64, other: &DenseSym) {
        axpy(a, &other.data, &mut self.data);
    }

    pub fn scaled(&self, a: f64) -> DenseSym {
        DenseSym { n: self.n, data: self.data.iter().map(|x| a * x).collect() }
    }

    pub fn max_abs_diff(&self, other: &DenseSym) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn count_nonzeros(&self) -> usize {
        self.data.iter().filter(|x| **x != 0.0).count()
    }
}

impl SymmetricOperator for DenseSym {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            *yi = dot(&self.data[i * n..(i + 1) * n], x);
        }
    }

    fn nnz(&self) -> usize {
        self.n * self.n
    }

    fn frobenius_norm(&self) -> f64 {
        self.frob_norm_sq().sqrt()
    }

    fn max_abs_row_sum(&self) -> Option<f64> {
        let n = self.n;
        Some((0..n).fold(0.0, |m, i| m.max(norm1(&self.data[i * n..(i + 1) * n]))))
    }

    fn to_dense(&self) -> DenseSym {
        self.clone()
    }
}

/// Sparse symmetric matrix; each stored `(i, j, v)` with `i <= j` stands for
/// both mirrored entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    /// Accumulates triplets in either triangle into canonical `i <= j` form.
    /// Off-diagonal triplets given in both triangles are averaged.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut acc: BTreeMap<(usize, usize), (f64, u8)> = BTreeMap::new();
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "index out of range");
            let key = (i.min(j), i.max(j));
            let side = if i == j { 3 } else if i < j { 1 } else { 2 };
            let e = acc.entry(key).or_insert((0.0, 0));
            e.0 += v;
            e.1 |= side;
        }
        let entries = acc
            .into_iter()
            .map(|((i, j), (v, sides))| if i != j && sides == 3 { (i, j, 0.5 * v) } else { (i, j, v) })
            .filter(|e| e.2 != 0.0)
            .collect();
        Self { n, entries }
    }

    pub fn identity(n: usize) -> Self {
        Self { n, entries: (0..n).map(|i| (i, i, 1.0)).collect() }
    }

    pub fn from_dense(m: &DenseSym) -> Self {
        let mut entries = Vec::new();
        for i in 0..m.n {
            for j in i..m.n {
                let v = m.get(i, j);
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self { n: m.n, entries }
    }

    /// `self • X` for a dense symmetric `X`.
    pub fn frob_inner_dense(&self, x: &DenseSym) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * x.get(i, i) } else { 2.0 * v * x.get(i, j) })
            .sum()
    }

    /// `v^T self v`
    pub fn quad(&self, v: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, a)| if i == j { a * v[i] * v[i] } else { 2.0 * a * v[i] * v[j] })
            .sum()
    }

    pub fn scaled(&self, a: f64) -> SparseSym {
        SparseSym { n: self.n, entries: self.entries.iter().map(|&(i, j, v)| (i, j, a * v)).collect() }
    }

    /// Weighted sum `sum_k w_k M_k` of matrices of equal dimension.
    pub fn weighted_sum(n: usize, parts: &[(&SparseSym, f64)]) -> SparseSym {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (m, w) in parts {
            for &(i, j, v) in &m.entries {
                *acc.entry((i, j)).or_insert(0.0) += w * v;
            }
        }
        SparseSym { n, entries: acc.into_iter().map(|((i, j), v)| (i, j, v)).collect() }
    }
}

impl SymmetricOperator for SparseSym {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
    }

    fn nnz(&self) -> usize {
        self.entries.iter().map(|e| if e.0 == e.1 { 1 } else { 2 }).sum()
    }

    fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }

    fn max_abs_row_sum(&self) -> Option<f64> {
        let mut rows = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            rows[i] += v.abs();
            if i != j {
                rows[j] += v.abs();
            }
        }
        Some(rows.into_iter().fold(0.0, f64::max))
    }
}

/// Symmetric block operator `scale * (0 G; G^T 0)` of dimension `m + n`,
/// where `G` is an `m x n` sparse matrix given by coordinate entries.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteOp {
    pub m: usize,
    pub n: usize,
    pub entries: Vec<(u32, u32, f64)>,
    pub scale: f64,
}

impl BipartiteOp {
    pub fn new(m: usize, n: usize, entries: Vec<(u32, u32, f64)>, scale: f64) -> Self {
        Self { m, n, entries, scale }
    }
}

impl SymmetricOperator for BipartiteOp {
    fn dim(&self) -> usize {
        self.m + self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let (top, bot) = x.split_at(self.m);
        let (ytop, ybot) = y.split_at_mut(self.m);
        for &(i, j, g) in &self.entries {
            let (i, j) = (i as usize, j as usize);
            let g = self.scale * g;
            ytop[i] += g * bot[j];
            ybot[j] += g * top[i];
        }
    }

    fn nnz(&self) -> usize {
        2 * self.entries.len()
    }

    fn frobenius_norm(&self) -> f64 {
        (2.0 * self.entries.iter().map(|e| e.2 * e.2).sum::<f64>()).sqrt() * self.scale.abs()
    }

    fn max_abs_row_sum(&self) -> Option<f64> {
        let mut rows = vec![0.0; self.m + self.n];
        for &(i, j, g) in &self.entries {
            rows[i as usize] += g.abs();
            rows[self.m + j as usize] += g.abs();
        }
        Some(rows.into_iter().fold(0.0, f64::max) * self.scale.abs())
    }
}

/// Gradient representations produced by the matrix objectives.
#[derive(Debug, Clone, PartialEq)]
pub enum SymOp {
    Dense(DenseSym),
    Sparse(SparseSym),
    Bipartite(BipartiteOp),
}

impl SymOp {
    fn inner(&self) -> &dyn SymmetricOperator {
        match self {
            SymOp::Dense(m) => m,
            SymOp::Sparse(m) => m,
            SymOp::Bipartite(m) => m,
        }
    }

    /// `self • X` for a dense symmetric `X`.
    pub fn frob_inner_dense(&self, x: &DenseSym) -> f64 {
        match self {
            SymOp::Dense(m) => m.frob_inner(x),
            SymOp::Sparse(m) => m.frob_inner_dense(x),
            SymOp::Bipartite(b) => {
                2.0 * b.scale
                    * b.entries
                        .iter()
                        .map(|&(i, j, g)| g * x.get(i as usize, b.m + j as usize))
                        .sum::<f64>()
            }
        }
    }
}

impl SymOp {
    /// `(self + other) / 2` when both share a representation (and, for
    /// bipartite operators, the same entry pattern); dense otherwise.
    pub fn average(&self, other: &SymOp) -> SymOp {
        match (self, other) {
            (SymOp::Dense(a), SymOp::Dense(b)) => {
                let mut out = a.scaled(0.5);
                out.add_scaled(0.5, b);
                SymOp::Dense(out)
            }
            (SymOp::Sparse(a), SymOp::Sparse(b)) if a.n == b.n => {
                SymOp::Sparse(SparseSym::weighted_sum(a.n, &[(a, 0.5), (b, 0.5)]))
            }
            (SymOp::Bipartite(a), SymOp::Bipartite(b))
                if a.m == b.m
                    && a.n == b.n
                    && a.entries.len() == b.entries.len()
                    && a.entries.iter().zip(&b.entries).all(|(x, y)| x.0 == y.0 && x.1 == y.1) =>
            {
                let entries = a
                    .entries
                    .iter()
                    .zip(&b.entries)
                    .map(|(x, y)| (x.0, x.1, 0.5 * (a.scale * x.2 + b.scale * y.2)))
                    .collect();
                SymOp::Bipartite(BipartiteOp::new(a.m, a.n, entries, 1.0))
            }
            _ => {
                let mut out = self.to_dense().scaled(0.5);
                out.add_scaled(0.5, &other.to_dense());
                SymOp::Dense(out)
            }
        }
    }
}

impl SymmetricOperator for SymOp {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.inner().apply(x, y)
    }
    fn nnz(&self) -> usize {
        self.inner().nnz()
    }
    fn frobenius_norm(&self) -> f64 {
        self.inner().frobenius_norm()
    }
    fn max_abs_row_sum(&self) -> Option<f64> {
        self.inner().max_abs_row_sum()
    }
    fn to_dense(&self) -> DenseSym {
        self.inner().to_dense()
    }
}

/// Dense rectangular matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `A^T y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            axpy(yi, self.row(i), &mut out);
        }
        out
    }

    pub fn transpose(&self) -> DenseMat {
        DenseMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &DenseMat) -> DenseMat {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a != 0.0 {
                    for j in 0..other.cols {
                        out.data[i * other.cols + j] += a * other.get(k, j);
                    }
                }
            }
        }
        out
    }

    /// `A^T A` as a dense symmetric matrix.
    pub fn gram(&self) -> DenseSym {
        DenseSym::from_fn(self.cols, |i, j| (0..self.rows).map(|r| self.get(r, i) * self.get(r, j)).sum())
    }

    pub fn frob_norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn frob_inner(&self, other: &DenseMat) -> f64 {
        dot(&self.data, &other.data)
    }

    pub fn max_abs_diff(&self, other: &DenseMat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn scaled(&self, a: f64) -> DenseMat {
        DenseMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| a * x).collect() }
    }
}

/// Thin singular value decomposition `A = U diag(s) V^T`, singular values
/// descending, zero ones dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: DenseMat,
    pub s: Vec<f64>,
    pub v: DenseMat,
}

impl Svd {
    /// `U diag(g(s)) U^T`
    pub fn left_gram(&self, g: impl Fn(f64) -> f64) -> DenseSym {
        outer_weighted(&self.u, &self.s, g)
    }

    /// `V diag(g(s)) V^T`
    pub fn right_gram(&self, g: impl Fn(f64) -> f64) -> DenseSym {
        outer_weighted(&self.v, &self.s, g)
    }
}

fn outer_weighted(a: &DenseMat, s: &[f64], g: impl Fn(f64) -> f64) -> DenseSym {
    let w: Vec<f64> = s.iter().map(|&x| g(x)).collect();
    DenseSym::from_fn(a.rows, |i, j| (0..a.cols).map(|k| a.get(i, k) * w[k] * a.get(j, k)).sum())
}

/// One-sided Jacobi SVD for small dense matrices. Small singular values
/// come out with absolute error near `eps * ||A||`, unlike square roots of
/// Gram eigenvalues.
pub fn thin_svd(a: &DenseMat) -> Svd {
    if a.rows < a.cols {
        let t = thin_svd(&a.transpose());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    let (m, n) = (a.rows, a.cols);
    // Work on columns: `w` holds A V column by column.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for cols in [&mut w, &mut v] {
                    let (lo, hi) = cols.split_at_mut(q);
                    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                        let (xp, xq) = (*x, *y);
                        *x = c * xp - s * xq;
                        *y = s * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = w.iter().enumerate().map(|(j, c)| (norm2(c), j)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let keep: Vec<(f64, usize)> = order.into_iter().filter(|&(s, _)| s > 0.0).collect();
    let r = keep.len();
    let u = DenseMat::from_fn(m, r, |i, k| w[keep[k].1][i] / keep[k].0);
    let vm = DenseMat::from_fn(n, r, |i, k| v[keep[k].1][i]);
    Svd { u, s: keep.iter().map(|k| k.0).collect(), v: vm }
}
