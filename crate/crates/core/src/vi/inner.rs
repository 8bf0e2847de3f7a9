//! Linearized VI kernel: primal–dual active sets on the exact problem, with a
//! Huber-continuation fallback when the exact iteration cycles.
//!
//! Optimality at a free dof carrying `a|x| + b·x` on `[lo, hi]` reads
//! `s ∈ ∂(a|x| + b·x + I)(x)` with `s = F − A u − Bᵀp`. With
//! `y = x + γ(s − b)` the prox equation selects one of four states per dof;
//! each state set is one saddle solve.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::functional::{ConeSpec, FunctionalSpec, ScalarTerm};
use crate::linalg::{norm_inf, CsrMatrix, SaddleSolver};

use super::residual::{residual_with_pressure, trace_zero_tol};

#[derive(Clone, Debug)]
pub struct InnerOptions {
    /// Absolute VI residual accepted as converged.
    pub tol: f64,
    /// Explicit regularization scales; `None` uses `ε₀·10^{-k}`,
    /// `k = 0..=8`, with `ε₀` the largest boundary trace.
    pub eps_schedule: Option<Vec<f64>>,
    /// Active-set sweeps per stage.
    pub max_sweeps: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            eps_schedule: None,
            max_sweeps: 60,
        }
    }
}

#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub residual: f64,
    /// Saddle solves performed.
    pub linear_solves: usize,
    pub converged: bool,
    pub eps_used: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum State {
    Zero,
    Pos,
    Neg,
    Quad,
}

struct Kernel<'a> {
    a: &'a CsrMatrix,
    b: &'a CsrMatrix,
    f: &'a [f64],
    terms: Vec<ScalarTerm>,
    gamma: Vec<f64>,
    solver: SaddleSolver,
    solves: usize,
}

impl<'a> Kernel<'a> {
    fn solve(&mut self, states: &[State], eps: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.a.nrows();
        let mut pinned = vec![false; n];
        let mut rhs = self.f.to_vec();
        let mut diag = vec![0.0; n];
        let mut shifted = false;
        for (t, st) in self.terms.iter().zip(states) {
            match st {
                State::Zero => {
                    pinned[t.dof] = true;
                    rhs[t.dof] = 0.0;
                }
                State::Pos => rhs[t.dof] -= t.b + t.a,
                State::Neg => rhs[t.dof] -= t.b - t.a,
                State::Quad => {
                    rhs[t.dof] -= t.b;
                    diag[t.dof] += t.a / eps;
                    shifted = true;
                }
            }
        }
        let shifted_a;
        let a = if shifted {
            shifted_a = self.a.add(&CsrMatrix::from_diagonal(&diag));
            &shifted_a
        } else {
            self.a
        };
        self.solves += 1;
        let g = vec![0.0; self.b.nrows()];
        self.solver.solve(a, self.b, Some(&pinned), &rhs, &g)
    }

    fn slack(&self, u: &[f64], p: &[f64]) -> Vec<f64> {
        let au = self.a.mul_vec(u);
        let btp = self.b.tr_mul_vec(p);
        self.terms
            .iter()
            .map(|t| self.f[t.dof] - au[t.dof] - btp[t.dof])
            .collect()
    }

    fn classify(&self, u: &[f64], s: &[f64], eps: f64) -> Vec<State> {
        self.terms
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let g = self.gamma[k];
                let y = u[t.dof] + g * (s[k] - t.b);
                let can_pos = t.hi > 0.0;
                let can_neg = t.lo < 0.0;
                let reg = eps > 0.0 && t.a > 0.0;
                let band = if reg { eps + g * t.a } else { g * t.a };
                if y > band || (reg && y > 0.0) {
                    if !can_pos {
                        State::Zero
                    } else if y > band {
                        State::Pos
                    } else {
                        State::Quad
                    }
                } else if y < -band || (reg && y < 0.0) {
                    if !can_neg {
                        State::Zero
                    } else if y < -band {
                        State::Neg
                    } else {
                        State::Quad
                    }
                } else {
                    State::Zero
                }
            })
            .collect()
    }

    /// Iterates state sets until a fixed point (true) or a cycle/sweep cap.
    fn sweep(&mut self, states: &mut Vec<State>, eps: f64, max: usize) -> Result<(bool, Vec<f64>, Vec<f64>)> {
        let mut seen: HashSet<Vec<State>> = HashSet::new();
        seen.insert(states.clone());
        let mut last = None;
        for _ in 0..max {
            let (u, p) = self.solve(states, eps)?;
            let s = self.slack(&u, &p);
            let next = self.classify(&u, &s, eps);
            if next == *states {
                return Ok((true, u, p));
            }
            last = Some((u, p));
            if !seen.insert(next.clone()) {
                *states = next;
                break;
            }
            *states = next;
        }
        let (u, p) = last.expect("at least one sweep");
        Ok((false, u, p))
    }
}

/// Solves `A u + Bᵀp + ∂J(u) + N_K(u) ∋ F`, `B u = 0` over the free dofs.
pub fn solve_convex_vi(
    a: &CsrMatrix,
    b: &CsrMatrix,
    f: &[f64],
    spec: &FunctionalSpec,
    cone: &ConeSpec,
    opts: &InnerOptions,
    warm: Option<&[f64]>,
) -> Result<InnerSolution> {
    let n = a.nrows();
    if a.ncols() != n || b.ncols() != n || f.len() != n || spec.dim() != n {
        return Err(Error::InvalidArgument("inconsistent VI dimensions".into()));
    }
    let diag = a.diagonal();
    if let Some(d) = diag.iter().copied().find(|d| !(*d > 0.0)) {
        return Err(Error::NotCoercive { alpha: d });
    }
    let terms = spec.scalar_terms(cone);
    let gamma = terms.iter().map(|t| 1.0 / diag[t.dof]).collect();
    let mut k = Kernel {
        a,
        b,
        f,
        terms: terms.clone(),
        gamma,
        solver: SaddleSolver::new(n, b.nrows()),
        solves: 0,
    };
    let eval = |u: &[f64], p: &[f64]| residual_with_pressure(a, b, f, &terms, u, p);

    let mut states: Vec<State> = match warm {
        Some(w) => {
            let tol = trace_zero_tol(w);
            k.terms
                .iter()
                .map(|t| {
                    let x = w[t.dof];
                    if x > tol && t.hi > 0.0 {
                        State::Pos
                    } else if x < -tol && t.lo < 0.0 {
                        State::Neg
                    } else {
                        State::Zero
                    }
                })
                .collect()
        }
        None => vec![State::Zero; k.terms.len()],
    };

    let max = opts.max_sweeps.max(1);
    let (u, p) = if k.terms.is_empty() {
        k.solve(&states, 0.0)?
    } else {
        // a cycling active set can still contain an exact state
        let (_, u, p) = k.sweep(&mut states, 0.0, max)?;
        (u, p)
    };
    let res = eval(&u, &p);
    let mut best = (res, u, p);
    if k.terms.is_empty() {
        return Ok(done(best, k.solves, res <= opts.tol, Vec::new()));
    }
    if res <= opts.tol {
        return Ok(done(best, k.solves, true, Vec::new()));
    }

    let eps0 = {
        let m = k.terms.iter().map(|t| best.1[t.dof].abs()).fold(0.0, f64::max);
        if m > trace_zero_tol(&best.1) {
            m
        } else {
            norm_inf(&best.1).max(1.0)
        }
    };
    let schedule = opts
        .eps_schedule
        .clone()
        .unwrap_or_else(|| (0..=8).map(|i| eps0 * 10f64.powi(-i)).collect());
    let mut used = Vec::new();
    for eps in schedule {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eps schedule entry {eps} is not positive"
            )));
        }
        used.push(eps);
        let stage = k.sweep(&mut states, eps, max).and_then(|(_, u, p)| {
            let s = k.slack(&u, &p);
            let mut exact = k.classify(&u, &s, 0.0);
            k.sweep(&mut exact, 0.0, max)
        });
        let (ue, pe) = match stage {
            Ok((_, ue, pe)) => (ue, pe),
            Err(Error::Singular { row }) => {
                log::debug!("continuation stopped at eps {eps:e}: singular pivot at row {row}");
                break;
            }
            Err(e) => return Err(e),
        };
        let res = eval(&ue, &pe);
        if res < best.0 {
            best = (res, ue, pe);
        }
        if res <= opts.tol {
            return Ok(done(best, k.solves, true, used));
        }
    }
    log::debug!("inner solve stalled at residual {:e}", best.0);
    Ok(done(best, k.solves, false, used))
}

fn done(best: (f64, Vec<f64>, Vec<f64>), solves: usize, converged: bool, eps_used: Vec<f64>) -> InnerSolution {
    let (residual, u, p) = best;
    InnerSolution {
        u,
        p,
        residual,
        linear_solves: solves,
        converged,
        eps_used,
    }
}
