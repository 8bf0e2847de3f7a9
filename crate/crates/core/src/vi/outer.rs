//! Outer iterations for the convective problem: the Oseen fixed point, the
//! frozen-convection Picard map, and the Galerkin regularized path.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use super::estimates::RieszMap;
use super::inner::{solve_convex_vi, InnerOptions};
use super::{ConvectionKind, DiscreteVI};
use crate::error::{Error, Result};
use crate::linalg::{sub, CsrMatrix, SaddleSolver};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Oseen,
    Picard,
    RegularizedPath,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Oseen => "oseen",
            Self::Picard => "picard",
            Self::RegularizedPath => "regularized-path",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oseen" => Ok(Self::Oseen),
            "picard" => Ok(Self::Picard),
            "regularized-path" => Ok(Self::RegularizedPath),
            _ => Err(Error::Config(format!("unknown scheme '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub inner: InnerOptions,
    /// Outer stopping tolerance on `‖w_{k+1} − w_k‖_H`.
    pub tol: f64,
    pub max_outer: usize,
    /// `w_{k+1} = w_k + θ(ŵ − w_k)`.
    pub relaxation: f64,
    /// Regularization scales for the path scheme (decreasing).
    pub eps_list: Vec<f64>,
    /// Allows the path scheme with one-sided constraints (projected).
    pub experimental_cone: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            inner: InnerOptions::default(),
            tol: 1e-10,
            max_outer: 100,
            relaxation: 1.0,
            eps_list: (0..12).map(|k| 1e-2 * 0.5f64.powi(k)).collect(),
            experimental_cone: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyCheck {
    pub norm: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Smallest invariant ball of the frozen-convection map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadiusInfo {
    pub radius: f64,
    /// `2KM/α`.
    pub contraction: f64,
    pub in_regime: bool,
}

/// Smaller root of `K M² − α M + ‖F‖ = 0`, `None` when there is no real
/// root.
pub fn contraction_radius(alpha: f64, k: f64, f_norm: f64) -> Option<RadiusInfo> {
    if !(alpha > 0.0) {
        return None;
    }
    if k <= 0.0 {
        return Some(RadiusInfo {
            radius: f_norm / alpha,
            contraction: 0.0,
            in_regime: true,
        });
    }
    let disc = alpha * alpha - 4.0 * k * f_norm;
    if disc < 0.0 {
        return None;
    }
    let radius = 2.0 * f_norm / (alpha + disc.sqrt());
    let contraction = 2.0 * k * radius / alpha;
    Some(RadiusInfo {
        radius,
        contraction,
        in_regime: contraction < 1.0,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathStep {
    pub eps: f64,
    pub norm: f64,
    pub newton_iterations: usize,
    /// `‖v_ε‖_H ≤ ‖F‖/α`.
    pub bound_holds: bool,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub scheme: Scheme,
    pub converged: bool,
    pub outer_iterations: usize,
    pub inner_iterations: Vec<usize>,
    /// VI residual of the nonlinear problem after each outer step.
    pub residual_history: Vec<f64>,
    /// `‖w_{k+1} − w_k‖_H`.
    pub increments: Vec<f64>,
    /// Successive increment ratios.
    pub contraction_ratios: Vec<f64>,
    pub eps_schedule: Vec<f64>,
    pub final_residual: f64,
    pub energy: Option<EnergyCheck>,
    /// `k_conv·‖F‖/α²`.
    pub uniqueness_value: Option<f64>,
    pub radius: Option<RadiusInfo>,
    /// Picard iterates outside the invariant ball.
    pub ball_exits: usize,
    pub path: Vec<PathStep>,
    pub wall_time: Duration,
    pub notes: Vec<String>,
}

impl SolveReport {
    fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            converged: false,
            outer_iterations: 0,
            inner_iterations: Vec::new(),
            residual_history: Vec::new(),
            increments: Vec::new(),
            contraction_ratios: Vec::new(),
            eps_schedule: Vec::new(),
            final_residual: f64::NAN,
            energy: None,
            uniqueness_value: None,
            radius: None,
            ball_exits: 0,
            path: Vec::new(),
            wall_time: Duration::ZERO,
            notes: Vec::new(),
        }
    }

    fn push_increment(&mut self, inc: f64) {
        if let Some(&prev) = self.increments.last() {
            if prev > 0.0 {
                self.contraction_ratios.push(inc / prev);
            }
        }
        self.increments.push(inc);
    }

    /// Largest ratio after the first few transient steps.
    pub fn observed_contraction(&self) -> Option<f64> {
        let r = &self.contraction_ratios;
        let skip = if r.len() > 3 { 1 } else { 0 };
        r.iter().skip(skip).copied().reduce(f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct VISolution {
    pub w: Vec<f64>,
    pub p: Vec<f64>,
    pub report: SolveReport,
    /// Per-ε iterates of the path scheme.
    pub path_solutions: Vec<Vec<f64>>,
}

fn finish(vi: &DiscreteVI, w: Vec<f64>, p: Vec<f64>, mut report: SolveReport, start: Instant) -> VISolution {
    report.final_residual = vi.residual(&w, Some(&p));
    if let Some(c) = &vi.constants {
        let norm = vi.h1_norm(&w);
        let bound = c.energy_bound();
        report.energy = Some(EnergyCheck {
            norm,
            bound,
            holds: norm <= bound * (1.0 + 1e-8),
        });
        if vi.convection.kind() != ConvectionKind::None {
            report.uniqueness_value = Some(c.uniqueness_value());
            if c.uniqueness_value() >= 1.0 {
                report.notes.push("uniqueness not guaranteed".into());
            }
        }
    }
    report.wall_time = start.elapsed();
    VISolution {
        w,
        p,
        report,
        path_solutions: Vec::new(),
    }
}

fn h_norm(vi: &DiscreteVI, x: &[f64]) -> f64 {
    vi.h1_norm(x)
}

/// Dispatches on `scheme`.
pub fn solve(vi: &DiscreteVI, scheme: Scheme, opts: &SolveOptions) -> Result<VISolution> {
    match scheme {
        Scheme::Oseen => oseen_fixed_point(vi, opts),
        Scheme::Picard => frozen_convection_picard(vi, opts),
        Scheme::RegularizedPath => galerkin_regularized_path(vi, opts),
    }
}

/// `w_{k+1} = S(A0 + N(w_k))`, `S` the convex VI solution operator.
pub fn oseen_fixed_point(vi: &DiscreteVI, opts: &SolveOptions) -> Result<VISolution> {
    let start = Instant::now();
    let mut report = SolveReport::new(Scheme::Oseen);
    let n = vi.dim();
    let mut w = vec![0.0; n];
    let mut p = vec![0.0; vi.b.nrows()];
    let linear = vi.convection.kind() == ConvectionKind::None;
    for k in 0..opts.max_outer.max(1) {
        let a = vi.linearized(&w);
        let warm = (k > 0).then_some(w.as_slice());
        let s = solve_convex_vi(&a, &vi.b, &vi.f, &vi.functional, &vi.cone, &opts.inner, warm)?;
        report.inner_iterations.push(s.linear_solves);
        report.eps_schedule.extend(&s.eps_used);
        let next: Vec<f64> = w.iter().zip(&s.u).map(|(a, b)| a + opts.relaxation * (b - a)).collect();
        let inc = h_norm(vi, &sub(&next, &w));
        report.push_increment(inc);
        w = next;
        p = s.p;
        let res = vi.residual(&w, Some(&p));
        report.residual_history.push(res);
        report.outer_iterations = k + 1;
        if linear {
            report.converged = s.converged;
            break;
        }
        if s.converged && inc <= opts.tol && res <= opts.inner.tol {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        report.notes.push(format!(
            "no convergence in {} outer iterations",
            report.outer_iterations
        ));
    }
    Ok(finish(vi, w, p, report, start))
}

/// `w_{k+1} = S(A0; F − a1(w_k, w_k, ·))`.
pub fn frozen_convection_picard(vi: &DiscreteVI, opts: &SolveOptions) -> Result<VISolution> {
    let start = Instant::now();
    let mut report = SolveReport::new(Scheme::Picard);
    if let Some(c) = &vi.constants {
        report.radius = contraction_radius(c.alpha, c.k_conv, c.dual_norm_f);
        match report.radius {
            None => report.notes.push("outside contraction regime: no real radius".into()),
            Some(r) if !r.in_regime => report.notes.push("outside contraction regime".into()),
            _ => {}
        }
    }
    let n = vi.dim();
    let mut w = vec![0.0; n];
    let mut p = vec![0.0; vi.b.nrows()];
    let linear = vi.convection.kind() == ConvectionKind::None;
    for k in 0..opts.max_outer.max(1) {
        let load: Vec<f64> = if linear {
            vi.f.clone()
        } else {
            sub(&vi.f, &vi.convection.apply(&w))
        };
        let warm = (k > 0).then_some(w.as_slice());
        let s = solve_convex_vi(&vi.a0, &vi.b, &load, &vi.functional, &vi.cone, &opts.inner, warm)?;
        report.inner_iterations.push(s.linear_solves);
        report.eps_schedule.extend(&s.eps_used);
        let next: Vec<f64> = w.iter().zip(&s.u).map(|(a, b)| a + opts.relaxation * (b - a)).collect();
        let inc = h_norm(vi, &sub(&next, &w));
        report.push_increment(inc);
        w = next;
        p = s.p;
        if let Some(r) = report.radius {
            if h_norm(vi, &w) > r.radius * (1.0 + 1e-9) + 1e-14 {
                report.ball_exits += 1;
            }
        }
        let res = vi.residual(&w, Some(&p));
        report.residual_history.push(res);
        report.outer_iterations = k + 1;
        if !inc.is_finite() {
            return Err(Error::Solver("Picard iteration diverged".into()));
        }
        if linear {
            report.converged = s.converged;
            break;
        }
        if s.converged && inc <= opts.tol && res <= opts.inner.tol {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        report.notes.push(format!(
            "no convergence in {} outer iterations",
            report.outer_iterations
        ));
    }
    Ok(finish(vi, w, p, report, start))
}

/// Damped Newton on `(A0 + N(v))v + ∇J_ε(v) + Bᵀp = F`, `Bv = 0` for each ε
/// of the decreasing list, warm-started along the path.
pub fn galerkin_regularized_path(vi: &DiscreteVI, opts: &SolveOptions) -> Result<VISolution> {
    let start = Instant::now();
    if !vi.cone.is_empty() && !opts.experimental_cone {
        return Err(Error::InvalidArgument("scheme excludes one-sided constraints".into()));
    }
    if opts.eps_list.is_empty() {
        return Err(Error::InvalidArgument("empty eps list".into()));
    }
    let mut report = SolveReport::new(Scheme::RegularizedPath);
    report.eps_schedule = opts.eps_list.clone();
    let riesz = RieszMap::new(&vi.h, &vi.b)?;
    let bound = vi.constants.as_ref().map(|c| c.energy_bound());
    let n = vi.dim();
    let m = vi.b.nrows();
    let mut solver = SaddleSolver::new(n, m);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; m];
    let mut path_solutions = Vec::new();
    let newton_tol = opts.inner.tol;
    let conv = vi.convection.kind() != ConvectionKind::None;

    let residual = |v: &[f64], eps: f64| -> Result<Vec<f64>> {
        let mut r = sub(&vi.f, &vi.a0.mul_vec(v));
        if conv {
            r = sub(&r, &vi.convection.apply(v));
        }
        let g = vi.functional.grad_eps(v, eps)?;
        Ok(sub(&r, &g))
    };

    let mut prev_eps = f64::INFINITY;
    for &eps in &opts.eps_list {
        if !(eps > 0.0) || eps >= prev_eps {
            return Err(Error::InvalidArgument(
                "eps list must be positive and decreasing".into(),
            ));
        }
        prev_eps = eps;
        let mut r = residual(&v, eps)?;
        let mut merit = riesz.dual_norm(&r);
        let mut iters = 0;
        let mut ok = merit <= newton_tol;
        while !ok && iters < 60 {
            iters += 1;
            let mut jac = vi
                .a0
                .add(&CsrMatrix::from_diagonal(&vi.functional.hessian_diag_eps(&v, eps)));
            if conv {
                jac = jac.add(&vi.convection.oseen(&v)).add(&vi.convection.transport(&v));
            }
            let (dv, pnew) = solver.solve(&jac, &vi.b, None, &r, &vec![0.0; m])?;
            let mut t = 1.0;
            let mut accepted = false;
            while t >= 1e-8 {
                let trial: Vec<f64> = v.iter().zip(&dv).map(|(a, d)| a + t * d).collect();
                let rt = residual(&trial, eps)?;
                let mt = riesz.dual_norm(&rt);
                if mt <= (1.0 - 1e-4 * t) * merit || mt <= newton_tol {
                    v = trial;
                    r = rt;
                    merit = mt;
                    // pressure of the full step; a damped step keeps the last one
                    if t == 1.0 {
                        p = pnew.clone();
                    }
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            ok = merit <= newton_tol;
        }
        report.inner_iterations.push(iters);
        if !ok {
            report.notes.push(format!(
                "Newton failed at eps = {eps:e}; returning the previous path point"
            ));
            if let Some(last) = path_solutions.last() {
                v = Vec::clone(last);
            }
            break;
        }
        let norm = h_norm(vi, &v);
        report.path.push(PathStep {
            eps,
            norm,
            newton_iterations: iters,
            bound_holds: bound.is_none_or(|b| norm <= b * (1.0 + 1e-8)),
        });
        path_solutions.push(v.clone());
        report.outer_iterations += 1;
    }
    report.converged = report.path.len() == opts.eps_list.len();
    report.residual_history.push(vi.residual(&v, None));
    let mut out = finish(vi, v, p, report, start);
    out.report.final_residual = vi.residual(&out.w, None);
    out.path_solutions = path_solutions;
    Ok(out)
}
