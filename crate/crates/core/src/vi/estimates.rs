//! Discrete coercivity, continuity, convection and trace constants on the
//! discretely divergence-free subspace, measured in the H¹ norm.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConvectionKind, DiscreteVI};
use crate::error::{Error, Result};
use crate::linalg::dense::null_space;
use crate::linalg::{dot, CsrMatrix, SaddleFactor, SaddleSolver};

/// H¹ Riesz map restricted to `ker B`.
#[derive(Clone, Debug)]
pub struct RieszMap {
    factor: SaddleFactor,
    m: usize,
}

impl RieszMap {
    pub fn new(h: &CsrMatrix, b: &CsrMatrix) -> Result<Self> {
        let factor = SaddleSolver::new(h.nrows(), b.nrows()).factor(h, b, None)?;
        Ok(Self { factor, m: b.nrows() })
    }

    /// `x ∈ ker B` with `(x, v)_H = g·v` for all `v ∈ ker B`.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        self.factor.solve(g, &vec![0.0; self.m]).0
    }

    /// `sup_{v ∈ ker B} g·v / ‖v‖_H`.
    pub fn dual_norm(&self, g: &[f64]) -> f64 {
        dot(g, &self.apply(g)).max(0.0).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct EstimateOptions {
    /// Largest free-dof count for the dense eigenproblems.
    pub dense_limit: usize,
    pub power_iterations: usize,
    pub starts: usize,
    pub seed: u64,
    /// Also estimate the L⁴ embedding constant.
    pub embedding: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            dense_limit: 3000,
            power_iterations: 40,
            starts: 3,
            seed: 7,
            embedding: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoercivityEstimate {
    /// Smallest eigenvalue of `sym(A0)` against H on `ker B`.
    pub alpha: f64,
    /// Operator norm of `A0` on `ker B` in H.
    pub k_cont: f64,
    /// `sup a1(w,u,v) / (‖w‖‖u‖‖v‖)` over `ker B` (power-iteration lower
    /// estimate); zero without convection.
    pub k_conv: f64,
    /// `sup ‖u‖_{L⁴} / ‖u‖_H` (power-iteration lower estimate).
    pub c_embed: Option<f64>,
    pub dual_norm_f: f64,
    /// `sup (Σ m_i u_i²)^{1/2} / ‖u‖_H` over friction dofs, `m_i` the lumped
    /// boundary weights.
    pub trace_constant: f64,
    pub kernel_dim: usize,
}

impl CoercivityEstimate {
    /// `k_conv·‖F‖/α²`; below one the nonlinear problem has a unique
    /// solution and the Oseen map contracts.
    pub fn uniqueness_value(&self) -> f64 {
        self.k_conv * self.dual_norm_f / (self.alpha * self.alpha)
    }

    /// `‖F‖/α`.
    pub fn energy_bound(&self) -> f64 {
        self.dual_norm_f / self.alpha
    }
}

fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn max_eig(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym(a))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

fn min_eig(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym(a))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn estimate_constants(vi: &DiscreteVI, opts: &EstimateOptions) -> Result<CoercivityEstimate> {
    let n = vi.dim();
    if n > opts.dense_limit {
        return Err(Error::InvalidArgument(format!(
            "constant estimation is dense; {n} free dofs exceed the limit {}",
            opts.dense_limit
        )));
    }
    let riesz = RieszMap::new(&vi.h, &vi.b)?;
    let dual_norm_f = riesz.dual_norm(&vi.f);

    let z = null_space(&vi.b.to_dense());
    let k = z.ncols();
    if k == 0 {
        return Err(Error::InvalidArgument("divergence-free subspace is trivial".into()));
    }
    let zt = z.transpose();
    let hz = &zt * vi.h.to_dense() * &z;
    let chol = sym(&hz)
        .cholesky()
        .ok_or_else(|| Error::Solver("norm matrix is not positive definite".into()))?;
    let l_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Solver("triangular solve failed".into()))?;
    let whiten = |m: DMatrix<f64>| &l_inv * m * l_inv.transpose();

    let s = whiten(&zt * vi.a0.to_dense() * &z);
    let alpha = min_eig(&s);
    let k_cont = s.clone().svd(false, false).singular_values.max();

    let weights = vi.functional.trace_weights();
    let trace_constant = if weights.iter().any(|&w| w > 0.0) {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(weights));
        max_eig(&whiten(&zt * d * &z)).max(0.0).sqrt()
    } else {
        0.0
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_start = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        normalize(&vi.h, riesz.apply(&g))
    };

    let k_conv = if vi.convection.kind() == ConvectionKind::None {
        0.0
    } else {
        let mut best = 0.0f64;
        for _ in 0..opts.starts.max(1) {
            let mut w = random_start(&mut rng);
            let mut u = random_start(&mut rng);
            let mut v = random_start(&mut rng);
            for _ in 0..opts.power_iterations {
                w = normalize(&vi.h, riesz.apply(&vi.convection.grad_first(&u, &v)));
                let nw = vi.convection.oseen(&w);
                u = normalize(&vi.h, riesz.apply(&nw.tr_mul_vec(&v)));
                v = normalize(&vi.h, riesz.apply(&nw.mul_vec(&u)));
            }
            best = best.max(vi.convection.oseen(&w).bilinear(&v, &u).abs());
        }
        best
    };

    let c_embed = if opts.embedding {
        let mut best = None::<f64>;
        for _ in 0..opts.starts.max(1) {
            let mut u = random_start(&mut rng);
            let mut val = 0.0;
            for _ in 0..opts.power_iterations {
                let Some((q, g)) = vi.convection.quartic(&u) else {
                    break;
                };
                val = q.max(0.0).powf(0.25);
                u = normalize(&vi.h, riesz.apply(&g));
            }
            if let Some((q, _)) = vi.convection.quartic(&u) {
                val = val.max(q.max(0.0).powf(0.25));
                best = Some(best.unwrap_or(0.0).max(val));
            }
        }
        best
    } else {
        None
    };

    Ok(CoercivityEstimate {
        alpha,
        k_cont,
        k_conv,
        c_embed,
        dual_norm_f,
        trace_constant,
        kernel_dim: k,
    })
}

fn normalize(h: &CsrMatrix, mut x: Vec<f64>) -> Vec<f64> {
    let nrm = h.bilinear(&x, &x).max(0.0).sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    x
}
