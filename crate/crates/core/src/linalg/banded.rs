//! Direct solver for the sparse (possibly indefinite, possibly nonsymmetric)
//! saddle-point systems: reverse Cuthill–McKee reordering followed by a
//! banded LU factorization with partial pivoting.

use std::collections::VecDeque;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Reverse Cuthill–McKee ordering of the symmetrized pattern of `a`.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.iter() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    let mut nbrs = Vec::new();
    // lowest-degree unvisited node, refined to a pseudo-peripheral one
    while let Some(seed) = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]) {
        let start = pseudo_peripheral(seed, &adj, &degree, &visited);
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(adj[v].iter().copied().filter(|&w| !visited[w]));
            nbrs.sort_by_key(|&w| (degree[w], w));
            for &w in &nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize], done: &[bool]) -> usize {
    let mut start = seed;
    let mut best_ecc = 0;
    for _ in 0..8 {
        let (last_level, ecc) = bfs_levels(start, adj, done);
        if ecc <= best_ecc {
            break;
        }
        best_ecc = ecc;
        start = *last_level
            .iter()
            .min_by_key(|&&v| (degree[v], v))
            .expect("bfs level is nonempty");
    }
    start
}

fn bfs_levels(start: usize, adj: &[Vec<usize>], done: &[bool]) -> (Vec<usize>, usize) {
    let mut level = vec![start];
    let mut seen = std::collections::HashSet::new();
    seen.insert(start);
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &level {
            for &w in &adj[v] {
                if !done[w] && seen.insert(w) {
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return (level, depth);
        }
        level = next;
        depth += 1;
    }
}

/// Symbolic data reusable for every matrix with the same pattern.
#[derive(Clone, Debug)]
pub struct BandOrdering {
    perm: Vec<usize>,
    inv: Vec<usize>,
    kl: usize,
    ku: usize,
}

impl BandOrdering {
    pub fn new(a: &CsrMatrix) -> Self {
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, j, _) in a.iter() {
            let (pi, pj) = (inv[i], inv[j]);
            if pi > pj {
                kl = kl.max(pi - pj);
            } else {
                ku = ku.max(pj - pi);
            }
        }
        Self { perm, inv, kl, ku }
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }
}

/// LU factors of a permuted banded matrix, row storage, LAPACK `gbtrf`
/// pivoting convention.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    ab: Vec<f64>,
    piv: Vec<usize>,
    ordering: BandOrdering,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let ordering = BandOrdering::new(a);
        Self::factor_with(a, ordering)
    }

    /// Factors `a` using a precomputed ordering. The pattern of `a` must be
    /// contained in the pattern the ordering was computed from.
    pub fn factor_with(a: &CsrMatrix, ordering: BandOrdering) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "banded LU needs a square matrix");
        let (kl, ku) = (ordering.kl, ordering.ku);
        // row i stores columns i-kl ..= i+kl+ku
        let width = 2 * kl + ku + 1;
        let mut ab = vec![0.0; n * width];
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for (i, j, v) in a.iter() {
            let (pi, pj) = (ordering.inv[i], ordering.inv[j]);
            assert!(pj + kl >= pi && pj <= pi + ku, "entry outside band of ordering");
            ab[pi * width + (pj + kl - pi)] += v;
        }
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = ab[idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = ab[idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-300 || best < scale * 1e-15 {
                return Err(Error::Singular { row: ordering.perm[k] });
            }
            piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    ab.swap(idx(k, j), idx(p, j));
                }
            }
            let pivot = ab[idx(k, k)];
            for i in k + 1..=last_row {
                let l = ab[idx(i, k)] / pivot;
                if l == 0.0 {
                    continue;
                }
                ab[idx(i, k)] = l;
                let (rk, ri) = (k * width, i * width);
                for j in k + 1..=last_col {
                    let ukj = ab[rk + (j + kl - k)];
                    if ukj != 0.0 {
                        ab[ri + (j + kl - i)] -= l * ukj;
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            width,
            ab,
            piv,
            ordering,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let (n, kl, ku, w) = (self.n, self.kl, self.ordering.ku, self.width);
        let mut x: Vec<f64> = self.ordering.perm.iter().map(|&old| b[old]).collect();
        // forward: interleaved row swaps and unit-lower elimination
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    x[i] -= self.ab[i * w + (k + kl - i)] * xk;
                }
            }
        }
        // backward with U (bandwidth kl + ku)
        for k in (0..n).rev() {
            let rk = k * w;
            let mut s = x[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.ab[rk + (j + kl - k)] * x[j];
            }
            x[k] = s / self.ab[rk + kl];
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.ordering.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Triplets;
    use nalgebra::{DMatrix, DVector};

    fn saddle(n: usize, m: usize) -> CsrMatrix {
        // SPD-ish tridiagonal block plus a coupling block with zero (2,2) block
        let mut t = Triplets::new(n + m, n + m);
        for i in 0..n {
            t.push(i, i, 4.0);
            if i + 1 < n {
                t.push(i, i + 1, -1.0);
                t.push(i + 1, i, -1.5);
            }
        }
        for k in 0..m {
            let j = (3 * k + 1) % n;
            t.push(n + k, j, 1.0);
            t.push(j, n + k, 1.0);
            t.push(n + k, (j + 1) % n, -2.0);
            t.push((j + 1) % n, n + k, -2.0);
        }
        t.to_csr()
    }

    #[test]
    fn solves_indefinite_saddle_system() {
        let a = saddle(30, 7);
        let lu = BandedLu::factor(&a).unwrap();
        let b: Vec<f64> = (0..37).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = lu.solve(&b);
        let r = a.mul_vec(&x);
        let err = r.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "residual {err}");
        let dense = a.to_dense().lu().solve(&DVector::from_vec(b)).unwrap();
        for (p, q) in x.iter().zip(dense.iter()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_diagonal_needs_pivoting() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 2.0, 1.0],
        ));
        let x = BandedLu::factor(&a).unwrap().solve(&[1.0, 2.0, 3.0]);
        let r = a.mul_vec(&x);
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[1] - 2.0).abs() < 1e-14 && (r[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn detects_singular() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
        assert!(matches!(BandedLu::factor(&a), Err(Error::Singular { .. })));
    }
}
