//! Linear solvers shared by the Newton corrector, the continuation driver and
//! the interior-point KKT factorization.
//!
//! Large systems are reordered with reverse Cuthill-McKee and factorized as a
//! banded LU with partial pivoting. Collocation problems are block-banded by
//! construction, so the bandwidth after reordering stays close to one stage.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Systems at or above this size are factorized in band storage.
pub const DENSE_LIMIT: usize = 500;

/// Pivots smaller than this fraction of the largest matrix entry are treated
/// as exact zeros.
const RELATIVE_PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is numerically singular (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("triplet ({row}, {col}) outside a {n}x{n} matrix")]
    OutOfBounds { row: usize, col: usize, n: usize },
}

/// Coordinate-format square matrix. Duplicate entries are summed.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    fn check(&self) -> Result<(), LinalgError> {
        for &(i, j, _) in &self.entries {
            if i >= self.n || j >= self.n {
                return Err(LinalgError::OutOfBounds {
                    row: i,
                    col: j,
                    n: self.n,
                });
            }
        }
        Ok(())
    }

    fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |m, e| m.max(e.2.abs()))
    }
}

/// Reverse Cuthill-McKee ordering of the symmetrized pattern.
///
/// Returns `perm` with `perm[new] = old`.
pub fn rcm_ordering(n: usize, entries: &[(usize, usize, f64)]) -> Vec<usize> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j, _) in entries {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adj, &degree);
        let begin = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = begin;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(start: usize, adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    // returns (last level nodes, eccentricity)
    let mut dist = vec![usize::MAX; adj.len()];
    let mut frontier = vec![start];
    dist[start] = 0;
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = depth + 1;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return (frontier, depth);
        }
        depth += 1;
        frontier = next;
    }
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut v = seed;
    let (mut last, mut ecc) = bfs_levels(v, adj);
    for _ in 0..8 {
        let cand = *last.iter().min_by_key(|&&w| (degree[w], w)).unwrap();
        let (l2, e2) = bfs_levels(cand, adj);
        if e2 <= ecc {
            break;
        }
        v = cand;
        last = l2;
        ecc = e2;
    }
    v
}

/// LU factorization with partial pivoting in band storage (the LAPACK
/// `gbtrf` layout: row interchanges widen the upper band by `kl`).
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    /// Factorizes a matrix whose entries satisfy `-kl <= j - i <= ku`.
    pub fn factor(
        n: usize,
        kl: usize,
        ku: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
        pivot_tol: f64,
    ) -> Result<Self, LinalgError> {
        let width = 2 * kl + ku + 1;
        let mut ab = vec![0.0; n * width];
        for (i, j, v) in entries {
            debug_assert!(j + kl >= i && j <= i + ku);
            ab[i * width + j + kl - i] += v;
        }
        let mut ipiv = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = ab[k * width + kl].abs();
            for i in k + 1..=last {
                let a = ab[i * width + k + kl - i].abs();
                if a > best {
                    best = a;
                    p = i;
                }
            }
            if !(best > pivot_tol) {
                return Err(LinalgError::Singular {
                    column: k,
                    pivot: best,
                });
            }
            ipiv[k] = p;
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    ab.swap(k * width + j + kl - k, p * width + j + kl - p);
                }
            }
            let pivot = ab[k * width + kl];
            let (upper, lower) = ab.split_at_mut((k + 1) * width);
            let row_k = &upper[k * width + kl + 1..k * width + kl + 1 + (jmax - k)];
            for i in k + 1..=last {
                let base = (i - k - 1) * width;
                let lk = base + k + kl - i;
                let l = lower[lk] / pivot;
                lower[lk] = l;
                if l == 0.0 {
                    continue;
                }
                let row_i = &mut lower[lk + 1..lk + 1 + (jmax - k)];
                for (a, b) in row_i.iter_mut().zip(row_k) {
                    *a -= l * b;
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            width,
            ab,
            ipiv,
        })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, w) = (self.n, self.kl, self.width);
        for k in 0..n {
            let p = self.ipiv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == 0.0 {
                continue;
            }
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.ab[i * w + k + kl - i] * bk;
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + kl + self.ku).min(n - 1);
            let row = &self.ab[k * w + kl..k * w + kl + (jmax - k) + 1];
            let mut s = b[k];
            for (a, x) in row[1..].iter().zip(&b[k + 1..=jmax]) {
                s -= a * x;
            }
            b[k] = s / row[0];
        }
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }
}

/// A factorized square system, dense or banded depending on size.
#[derive(Debug, Clone)]
pub enum Factorization {
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Banded {
        perm: Vec<usize>,
        lu: BandLu,
    },
}

impl Factorization {
    /// Factorizes `a`, choosing dense LU below [`DENSE_LIMIT`].
    pub fn new(a: &Triplets) -> Result<Self, LinalgError> {
        a.check()?;
        let tol = RELATIVE_PIVOT_TOL * a.max_abs().max(f64::MIN_POSITIVE);
        if a.n < DENSE_LIMIT {
            let lu = a.to_dense().lu();
            check_dense_pivots(&lu, tol)?;
            return Ok(Factorization::Dense(lu));
        }
        let perm = rcm_ordering(a.n, &a.entries);
        let mut inv = vec![0; a.n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut kl, mut ku) = (0, 0);
        for &(i, j, _) in &a.entries {
            let (pi, pj) = (inv[i], inv[j]);
            if pi > pj {
                kl = kl.max(pi - pj);
            } else {
                ku = ku.max(pj - pi);
            }
        }
        let lu = BandLu::factor(
            a.n,
            kl,
            ku,
            a.entries.iter().map(|&(i, j, v)| (inv[i], inv[j], v)),
            tol,
        )?;
        Ok(Factorization::Banded { perm, lu })
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self, LinalgError> {
        let tol = RELATIVE_PIVOT_TOL * a.amax().max(f64::MIN_POSITIVE);
        let lu = a.clone().lu();
        check_dense_pivots(&lu, tol)?;
        Ok(Factorization::Dense(lu))
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Factorization::Dense(lu) => {
                let rhs = DVector::from_column_slice(b);
                lu.solve(&rhs)
                    .map(|x| x.as_slice().to_vec())
                    .unwrap_or_else(|| vec![f64::NAN; b.len()])
            }
            Factorization::Banded { perm, lu } => {
                let mut pb: Vec<f64> = perm.iter().map(|&old| b[old]).collect();
                lu.solve_in_place(&mut pb);
                let mut x = vec![0.0; b.len()];
                for (new, &old) in perm.iter().enumerate() {
                    x[old] = pb[new];
                }
                x
            }
        }
    }
}

fn check_dense_pivots(
    lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    tol: f64,
) -> Result<(), LinalgError> {
    let u = lu.u();
    for k in 0..u.nrows().min(u.ncols()) {
        let p = u[(k, k)].abs();
        if !(p > tol) {
            return Err(LinalgError::Singular { column: k, pivot: p });
        }
    }
    Ok(())
}

/// Solves a dense square system, reporting singularity when a pivot falls
/// below `abs_pivot_tol`.
pub fn solve_dense(
    a: &DMatrix<f64>,
    b: &[f64],
    abs_pivot_tol: f64,
) -> Result<Vec<f64>, LinalgError> {
    let lu = a.clone().lu();
    check_dense_pivots(&lu, abs_pivot_tol)?;
    let x = lu
        .solve(&DVector::from_column_slice(b))
        .ok_or(LinalgError::Singular {
            column: 0,
            pivot: 0.0,
        })?;
    Ok(x.as_slice().to_vec())
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
