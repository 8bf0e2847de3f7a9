//! Sparse storage, the banded direct solver and the saddle-point wrapper
//! used by every linear solve in the crate.

mod banded;
pub mod dense;
mod sparse;

pub use banded::{reverse_cuthill_mckee, BandOrdering, BandedLu};
pub use sparse::{axpy, dot, norm2, norm_inf, sub, CsrMatrix, Triplets};

use crate::error::Result;

/// Saddle-point structure `[A Bᵀ; B 0]` over `n` primal and `m` dual unknowns.
///
/// Primal rows flagged in `pinned` are replaced by identity rows (and their
/// columns dropped), which imposes `u_i = rhs_i`. When the remaining columns
/// of `B` no longer see the constant pressure, the first dual unknown is
/// fixed to zero. The band ordering is computed once from the unpinned
/// pattern and reused.
#[derive(Clone, Debug)]
pub struct SaddleSolver {
    n: usize,
    m: usize,
    ordering: Option<BandOrdering>,
}

impl SaddleSolver {
    pub fn new(n: usize, m: usize) -> Self {
        Self { n, m, ordering: None }
    }

    pub fn primal_dim(&self) -> usize {
        self.n
    }

    pub fn dual_dim(&self) -> usize {
        self.m
    }

    /// Dual row to fix when `1ᵀB` vanishes on the unpinned columns.
    fn gauge(b: &CsrMatrix, pinned: Option<&[bool]>) -> Option<usize> {
        if b.nrows() == 0 {
            return None;
        }
        let col = b.tr_mul_vec(&vec![1.0; b.nrows()]);
        let seen = col
            .iter()
            .enumerate()
            .filter(|&(j, _)| !pinned.is_some_and(|p| p[j]))
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        (seen <= 1e-10 * b.max_abs()).then_some(0)
    }

    fn build(a: &CsrMatrix, b: &CsrMatrix, pinned: Option<&[bool]>, gauge: Option<usize>) -> CsrMatrix {
        let (n, m) = (a.nrows(), b.nrows());
        let is_pinned = |i: usize| pinned.is_some_and(|p| p[i]);
        let mut t = Triplets::with_capacity(n + m, n + m, a.nnz() + 2 * b.nnz() + n);
        for i in 0..n {
            if is_pinned(i) {
                t.push(i, i, 1.0);
                continue;
            }
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if !is_pinned(j) {
                    t.push(i, j, x);
                }
            }
        }
        for k in 0..m {
            if gauge == Some(k) {
                t.push(n + k, n + k, 1.0);
                continue;
            }
            let (c, v) = b.row(k);
            for (&j, &x) in c.iter().zip(v) {
                if !is_pinned(j) {
                    t.push(n + k, j, x);
                    t.push(j, n + k, x);
                }
            }
        }
        t.to_csr()
    }

    /// Factors the saddle matrix for repeated solves.
    pub fn factor(&mut self, a: &CsrMatrix, b: &CsrMatrix, pinned: Option<&[bool]>) -> Result<SaddleFactor> {
        assert_eq!(a.nrows(), self.n);
        assert_eq!(b.nrows(), self.m);
        if self.ordering.is_none() {
            let full = Self::build(a, b, None, None);
            // include the diagonal so pinned identity rows stay in the band
            let full = full.add(&CsrMatrix::identity(self.n + self.m).scale(0.0));
            self.ordering = Some(BandOrdering::new(&full));
        }
        let gauge = Self::gauge(b, pinned);
        let k = Self::build(a, b, pinned, gauge);
        let lu = BandedLu::factor_with(&k, self.ordering.clone().unwrap())?;
        let pinned_cols = pinned
            .filter(|p| p.iter().any(|&x| x))
            .map(|p| (p.to_vec(), a.clone(), b.clone()));
        Ok(SaddleFactor {
            n: self.n,
            m: self.m,
            lu,
            pinned_cols,
            gauge,
        })
    }

    /// Solves `A u + Bᵀ p = f`, `B u = g` with `u_i = f_i` on pinned rows.
    pub fn solve(
        &mut self,
        a: &CsrMatrix,
        b: &CsrMatrix,
        pinned: Option<&[bool]>,
        f: &[f64],
        g: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok(self.factor(a, b, pinned)?.solve(f, g))
    }
}

/// Factored saddle matrix.
#[derive(Clone, Debug)]
pub struct SaddleFactor {
    n: usize,
    m: usize,
    lu: BandedLu,
    pinned_cols: Option<(Vec<bool>, CsrMatrix, CsrMatrix)>,
    gauge: Option<usize>,
}

impl SaddleFactor {
    pub fn solve(&self, f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut rhs = Vec::with_capacity(self.n + self.m);
        rhs.extend_from_slice(f);
        rhs.extend_from_slice(g);
        if let Some((p, a, b)) = &self.pinned_cols {
            // pinned columns were dropped: move their known values to the rhs
            let fixed: Vec<f64> = (0..self.n).map(|i| if p[i] { f[i] } else { 0.0 }).collect();
            if fixed.iter().any(|&v| v != 0.0) {
                let au = a.mul_vec(&fixed);
                let bu = b.mul_vec(&fixed);
                for i in 0..self.n {
                    if !p[i] {
                        rhs[i] -= au[i];
                    }
                }
                for k in 0..self.m {
                    rhs[self.n + k] -= bu[k];
                }
            }
        }
        if let Some(k) = self.gauge {
            rhs[self.n + k] = 0.0;
        }
        let x = self.lu.solve(&rhs);
        (x[..self.n].to_vec(), x[self.n..].to_vec())
    }
}

/// Conjugate gradients for a symmetric positive semidefinite operator given
/// as a closure. Consistent singular systems converge to the minimum-norm
/// solution when started from zero.
pub fn conjugate_gradient(apply: impl Fn(&[f64]) -> Vec<f64>, b: &[f64], rel_tol: f64, max_iter: usize) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let stop = rel_tol * rel_tol * rr.max(f64::MIN_POSITIVE);
    for _ in 0..max_iter {
        if rr <= stop {
            break;
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let step = rr / pap;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_rows_take_prescribed_values() {
        let a = CsrMatrix::from_dense(&nalgebra::DMatrix::from_row_slice(
            3,
            3,
            &[4.0, -1.0, 0.0, -1.0, 4.0, -1.0, 0.0, -1.0, 4.0],
        ));
        let b = CsrMatrix::from_dense(&nalgebra::DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]));
        let mut s = SaddleSolver::new(3, 1);
        let pinned = [false, true, false];
        let (u, _p) = s.solve(&a, &b, Some(&pinned), &[1.0, 0.5, 2.0], &[0.0]).unwrap();
        assert!((u[1] - 0.5).abs() < 1e-14);
        assert!((u[0] + u[1] + u[2]).abs() < 1e-13);
    }

    #[test]
    fn cg_solves_spd() {
        let a = CsrMatrix::from_dense(&nalgebra::DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]));
        let x = conjugate_gradient(|v| a.mul_vec(v), &[1.0, 1.0], 1e-14, 50);
        let r = a.mul_vec(&x);
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12);
    }
}
