use nalgebra::{DVector, SymmetricEigen};

use crate::instance::SmallInstance;

#[derive(Clone, Copy, Debug)]
pub struct ProxOptions {
    pub max_iters: usize,
    /// Stop when the fixed-point step `‖x − prox(x − t∇)‖∞ / t` falls below.
    pub tol: f64,
}

impl Default for ProxOptions {
    fn default() -> Self {
        Self {
            max_iters: 1_000_000,
            tol: 1e-13,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProxResult {
    pub u: DVector<f64>,
    pub iterations: usize,
    pub step_residual: f64,
}

/// Proximal map of `t·(a|x| + b·x)` restricted to `[lo, hi]`.
fn prox_1d(y: f64, t: f64, (a, b, lo, hi): (f64, f64, f64, f64)) -> f64 {
    let z = y - t * b;
    let s = z.signum() * (z.abs() - t * a).max(0.0);
    s.clamp(lo, hi)
}

fn prox(inst: &SmallInstance, y: &DVector<f64>, t: f64) -> DVector<f64> {
    DVector::from_fn(y.len(), |i, _| prox_1d(y[i], t, inst.laws[i].coefficients()))
}

/// Forward–backward splitting on `A v − f + ∂J(v) ∋ 0`. Symmetric `A` uses
/// accelerated steps `1/L` with adaptive restart; otherwise plain steps
/// `μ/L²`, `μ` the smallest eigenvalue of `sym(A)`.
pub fn proximal_gradient_reference(inst: &SmallInstance, opts: &ProxOptions) -> ProxResult {
    let n = inst.n();
    let sym = (&inst.a + inst.a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let mu = eig.min();
    let lip = inst.a.norm().max(mu);
    let symmetric = inst.is_symmetric();
    let t = if symmetric { 1.0 / eig.max() } else { mu / (lip * lip) };

    let grad = |x: &DVector<f64>| &inst.a * x - &inst.f;
    let mut x = DVector::zeros(n);
    let mut y = x.clone();
    let mut theta = 1.0f64;
    let mut step = f64::INFINITY;
    for it in 1..=opts.max_iters {
        let next = prox(inst, &(&y - grad(&y) * t), t);
        step = (&next - &y).amax() / t;
        if step <= opts.tol {
            return ProxResult {
                u: next,
                iterations: it,
                step_residual: step,
            };
        }
        if symmetric {
            let th = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let restart = (&y - &next).dot(&(&next - &x)) > 0.0;
            if restart {
                theta = 1.0;
                y = next.clone();
            } else {
                y = &next + (&next - &x) * ((theta - 1.0) / th);
                theta = th;
            }
        } else {
            y = next.clone();
        }
        x = next;
    }
    ProxResult {
        u: x,
        iterations: opts.max_iters,
        step_residual: step,
    }
}
