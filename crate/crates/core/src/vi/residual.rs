//! VI residual: worst violation of `F·d − A v·d − J'(v; d) ≤ 0` over
//! coordinate probe directions, plus the divergence constraint.

use crate::functional::ScalarTerm;
use crate::linalg::{conjugate_gradient, norm_inf, CsrMatrix};

/// Traces with `|x|` below this are treated as sitting on the kink.
pub fn trace_zero_tol(v: &[f64]) -> f64 {
    1e-12 * norm_inf(v).max(1.0)
}

/// Residual for a given pressure.
pub fn residual_with_pressure(
    a: &CsrMatrix,
    b: &CsrMatrix,
    f: &[f64],
    terms: &[ScalarTerm],
    v: &[f64],
    p: &[f64],
) -> f64 {
    let av = a.mul_vec(v);
    let btp = b.tr_mul_vec(p);
    let r: Vec<f64> = (0..v.len()).map(|i| f[i] - av[i] - btp[i]).collect();
    worst_violation(b, terms, v, &r)
}

/// Residual with the pressure chosen by [`fit_pressure`].
pub fn residual_free_pressure(a: &CsrMatrix, b: &CsrMatrix, f: &[f64], terms: &[ScalarTerm], v: &[f64]) -> f64 {
    let p = fit_pressure(a, b, f, terms, v);
    residual_with_pressure(a, b, f, terms, v, &p)
}

/// Least-squares pressure for `F − A v − Bᵀp = 0` on the dofs free of
/// friction terms.
pub fn fit_pressure(a: &CsrMatrix, b: &CsrMatrix, f: &[f64], terms: &[ScalarTerm], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    if b.nrows() == 0 {
        return Vec::new();
    }
    let mut mask = vec![1.0; n];
    for t in terms {
        mask[t.dof] = 0.0;
    }
    let av = a.mul_vec(v);
    let r0: Vec<f64> = (0..n).map(|i| f[i] - av[i]).collect();
    let masked = |x: Vec<f64>| -> Vec<f64> { x.iter().zip(&mask).map(|(a, m)| a * m).collect() };
    let rhs = b.mul_vec(&masked(r0));
    conjugate_gradient(
        |q| b.mul_vec(&masked(b.tr_mul_vec(q))),
        &rhs,
        1e-14,
        20 * b.nrows() + 100,
    )
}

fn worst_violation(b: &CsrMatrix, terms: &[ScalarTerm], v: &[f64], r: &[f64]) -> f64 {
    let zero = trace_zero_tol(v);
    let mut is_term = vec![false; v.len()];
    let mut worst = 0.0f64;
    for t in terms {
        is_term[t.dof] = true;
        let x = v[t.dof];
        let ri = r[t.dof];
        if x < t.lo - zero || x > t.hi + zero {
            worst = worst.max((x - x.clamp(t.lo, t.hi)).abs());
        }
        for d in [1.0, -1.0] {
            if let Some(jd) = t.directional(x, d, zero) {
                worst = worst.max(d * ri - jd);
            }
        }
    }
    for (i, ri) in r.iter().enumerate() {
        if !is_term[i] {
            worst = worst.max(ri.abs());
        }
    }
    worst.max(norm_inf(&b.mul_vec(v)))
}
