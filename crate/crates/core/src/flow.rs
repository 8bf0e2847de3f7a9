//! End-to-end solve of a [`ProblemSpec`]: assembly, constants, scheme,
//! multipliers and checks.

use crate::error::Result;
use crate::multipliers::{check_complementarity, recover_multipliers, ComplementarityReport, Multipliers};
use crate::problem::{assemble, AssembledSystem, ProblemSpec};
use crate::vi::{solve, EstimateCheck, EstimateOptions, Scheme, SolveOptions, SolveReport};

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub scheme: Scheme,
    pub solve: SolveOptions,
    /// Estimate the constants (dense; skipped above the size limit).
    pub estimate: bool,
    pub estimate_opts: EstimateOptions,
    /// Proceed when `alpha ≤ 0`.
    pub allow_noncoercive: bool,
    /// Complementarity tolerance; `None` uses `1e-6·max g`.
    pub comp_tol: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::Oseen,
            solve: SolveOptions::default(),
            estimate: true,
            estimate_opts: EstimateOptions::default(),
            allow_noncoercive: false,
            comp_tol: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowSolution {
    /// Free-dof velocity `w`.
    pub w: Vec<f64>,
    /// Cartesian velocity `U + w` at the P2 nodes, interleaved.
    pub velocity: Vec<f64>,
    /// Pressure at the mesh vertices (total pressure for the rotational
    /// form).
    pub pressure: Vec<f64>,
    pub report: SolveReport,
    pub multipliers: Option<Multipliers>,
    pub complementarity: Option<ComplementarityReport>,
    pub estimate: Option<EstimateCheck>,
}

impl FlowSolution {
    pub fn converged(&self) -> bool {
        self.report.converged
    }
}

/// Multipliers are recovered when the final VI residual is within the
/// inner tolerance; otherwise the report notes why they are missing.
pub fn solve_system(sys: &mut AssembledSystem, opts: &RunOptions) -> Result<FlowSolution> {
    if opts.estimate && sys.vi.constants.is_none() {
        if sys.vi.dim() <= opts.estimate_opts.dense_limit {
            sys.vi.estimate(&opts.estimate_opts, opts.allow_noncoercive)?;
        } else {
            log::warn!("{} free dofs: constant estimation skipped", sys.vi.dim());
        }
    }
    let sol = solve(&sys.vi, opts.scheme, &opts.solve)?;
    let mut report = sol.report;
    let tol = opts.solve.inner.tol.max(opts.solve.tol);
    let multipliers = match recover_multipliers(&sys.vi, &sol.w, Some(&sol.p), tol) {
        Ok(m) => Some(m),
        Err(e) => {
            report.notes.push(format!("multipliers not recovered: {e}"));
            None
        }
    };
    let complementarity = multipliers
        .as_ref()
        .map(|m| check_complementarity(m, &sol.w, opts.comp_tol));
    let estimate = if sys.vi.constants.is_some() {
        Some(sys.vi.check_estimates(&sol.w)?)
    } else {
        None
    };
    let p = multipliers.as_ref().map(|m| m.pressure.clone()).unwrap_or(sol.p);
    Ok(FlowSolution {
        velocity: sys.velocity_cartesian(&sol.w),
        pressure: sys.pressure_full(&p),
        w: sol.w,
        report,
        multipliers,
        complementarity,
        estimate,
    })
}

/// Assembles and solves.
pub fn run(spec: &ProblemSpec, opts: &RunOptions) -> Result<(AssembledSystem, FlowSolution)> {
    let mut sys = assemble(spec)?;
    let sol = solve_system(&mut sys, opts)?;
    Ok((sys, sol))
}
