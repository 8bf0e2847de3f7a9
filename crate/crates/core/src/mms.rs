//! Built-in manufactured and limit studies on channel flow.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flow::{run, RunOptions};
use crate::mesh::{unit_square, BoundaryPatch, PatchKind, RectSide, ScalarField, VectorField};
use crate::problem::{Equation, ProblemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmsCase {
    /// Velocity data on the whole boundary, exact field
    /// `u = (sin πy, 0)`, `p = ½ − x`.
    PoiseuilleDirichlet,
    /// Parabolic channel with Tresca walls whose threshold exceeds any wall
    /// stress; compared against the no-slip run.
    PoiseuilleSlipLargeG,
    /// Same channel with the threshold decreasing to zero; the wall
    /// tangential stress must follow it to zero.
    PoiseuilleSlipZeroGLimit,
}

impl MmsCase {
    pub const ALL: [MmsCase; 3] = [
        MmsCase::PoiseuilleDirichlet,
        MmsCase::PoiseuilleSlipLargeG,
        MmsCase::PoiseuilleSlipZeroGLimit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MmsCase::PoiseuilleDirichlet => "poiseuille-dirichlet",
            MmsCase::PoiseuilleSlipLargeG => "poiseuille-slip-large-g",
            MmsCase::PoiseuilleSlipZeroGLimit => "poiseuille-slip-zero-g-limit",
        }
    }
}

impl fmt::Display for MmsCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MmsCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown manufactured case '{s}'")))
    }
}

/// One row of a study.
#[derive(Clone, Debug, PartialEq)]
pub struct MmsRow {
    /// Cells per side, or the threshold for the zero-g sweep.
    pub parameter: f64,
    pub dofs: usize,
    /// `|u − u_h|_{H¹}` against the exact or reference velocity.
    pub velocity_h1: f64,
    pub velocity_l2: f64,
    /// Mean-free L² pressure error (NaN when not applicable).
    pub pressure_l2: f64,
    /// Largest `|σ_τ|` on the walls (NaN without Tresca walls).
    pub wall_stress: f64,
}

#[derive(Clone, Debug)]
pub struct MmsTable {
    pub case: MmsCase,
    pub rows: Vec<MmsRow>,
    /// H¹ velocity rates between consecutive refinements.
    pub h1_rates: Vec<f64>,
    pub pressure_rates: Vec<f64>,
    pub pass: bool,
    pub verdict: String,
}

impl fmt::Display for MmsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "case {}", self.case)?;
        writeln!(
            f,
            "{:>12} {:>8} {:>12} {:>12} {:>12} {:>12}",
            "param", "dofs", "H1 vel", "L2 vel", "L2 pres", "wall stress"
        )?;
        let cell = |v: f64| {
            if v.is_nan() {
                format!("{:>12}", "-")
            } else {
                format!("{v:>12.4e}")
            }
        };
        for r in &self.rows {
            writeln!(
                f,
                "{} {:>8} {} {} {} {}",
                cell(r.parameter),
                r.dofs,
                cell(r.velocity_h1),
                cell(r.velocity_l2),
                cell(r.pressure_l2),
                cell(r.wall_stress)
            )?;
        }
        if !self.h1_rates.is_empty() {
            let fmt_rates = |v: &[f64]| v.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(" ");
            writeln!(f, "H1 velocity rates: {}", fmt_rates(&self.h1_rates))?;
            writeln!(f, "L2 pressure rates: {}", fmt_rates(&self.pressure_rates))?;
        }
        write!(f, "{}: {}", if self.pass { "PASS" } else { "FAIL" }, self.verdict)
    }
}

fn rates(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn dirichlet_spec(n: usize, nu: f64) -> Result<ProblemSpec> {
    let mesh = unit_square(n, n, |_, _| 1)?;
    let exact = VectorField::new(
        ScalarField::new(|p| (PI * p[1]).sin()).with_source("sin(pi*y)"),
        ScalarField::constant(0.0),
    );
    let force = VectorField::new(
        ScalarField::new(move |p| nu * PI * PI * (PI * p[1]).sin() - 1.0)
            .with_source(format!("{nu}*pi^2*sin(pi*y) - 1")),
        ScalarField::constant(0.0),
    );
    Ok(ProblemSpec::new(
        mesh,
        vec![BoundaryPatch::new(1, PatchKind::Velocity).with_velocity(exact)],
        nu,
        Equation::Stokes,
    )
    .with_force(force))
}

/// Unit-square channel: parabolic profile on both ends (tag 1), walls of
/// tag 8 with threshold `g`, or no-slip walls when `g` is `None`.
fn channel(n: usize, g: Option<f64>) -> Result<ProblemSpec> {
    let wall = if g.is_some() { 8 } else { 1 };
    let mesh = unit_square(n, n, |s, _| match s {
        RectSide::Left | RectSide::Right => 1,
        _ => wall,
    })?;
    let profile = VectorField::new(
        ScalarField::new(|p| p[1] * (1.0 - p[1])).with_source("y*(1-y)"),
        ScalarField::constant(0.0),
    );
    let mut patches = vec![BoundaryPatch::new(1, PatchKind::Velocity).with_velocity(profile)];
    if let Some(g) = g {
        patches.push(BoundaryPatch::new(8, PatchKind::TrescaSlip).with_threshold(ScalarField::constant(g)));
    }
    let mut spec = ProblemSpec::new(mesh, patches, 1.0, Equation::Stokes);
    spec.override_admissibility = g.is_some_and(|g| g <= 0.0);
    Ok(spec)
}

fn opts() -> RunOptions {
    RunOptions {
        estimate: false,
        ..Default::default()
    }
}

/// Runs a study over `levels` refinements starting from 4 cells per side
/// (the zero-g sweep uses `levels + 2` thresholds on the coarsest mesh).
pub fn run_mms(case: MmsCase, levels: usize) -> Result<MmsTable> {
    if levels == 0 {
        return Err(Error::InvalidArgument("at least one level is required".into()));
    }
    match case {
        MmsCase::PoiseuilleDirichlet => {
            let nu = 1.0;
            let exact_u = |p: [f64; 2]| {
                let (s, c) = ((PI * p[1]).sin(), (PI * p[1]).cos());
                ([s, 0.0], [[0.0, PI * c], [0.0, 0.0]])
            };
            let exact_p = |p: [f64; 2]| 0.5 - p[0];
            let mut rows = Vec::new();
            for k in 0..=levels {
                let n = 4 << k;
                let (sys, sol) = run(&dirichlet_spec(n, nu)?, &opts())?;
                let (l2, h1) = sys.space.velocity_errors(&sol.velocity, &exact_u);
                rows.push(MmsRow {
                    parameter: n as f64,
                    dofs: sys.n_free(),
                    velocity_h1: h1,
                    velocity_l2: l2,
                    pressure_l2: sys.space.pressure_error(&sol.pressure, &exact_p),
                    wall_stress: f64::NAN,
                });
            }
            let h1_rates = rates(&rows.iter().map(|r| r.velocity_h1).collect::<Vec<_>>());
            let pressure_rates = rates(&rows.iter().map(|r| r.pressure_l2).collect::<Vec<_>>());
            let worst = h1_rates.iter().copied().fold(f64::INFINITY, f64::min);
            let pass = !h1_rates.is_empty() && worst >= 1.8;
            Ok(MmsTable {
                case,
                rows,
                h1_rates,
                pressure_rates,
                pass,
                verdict: format!("smallest H1 velocity rate {worst:.3} (required >= 1.8)"),
            })
        }
        MmsCase::PoiseuilleSlipLargeG => {
            let mut rows = Vec::new();
            let mut worst = 0.0f64;
            for k in 0..levels {
                let n = 4 << k;
                let (sys, slip) = run(&channel(n, Some(1e6))?, &opts())?;
                let (_, wall) = run(&channel(n, None)?, &opts())?;
                let diff: f64 = slip
                    .velocity
                    .iter()
                    .zip(&wall.velocity)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let delta: Vec<f64> = slip.velocity.iter().zip(&wall.velocity).map(|(a, b)| a - b).collect();
                let (dl2, dh1) = sys.space.velocity_errors(&delta, &|_| ([0.0; 2], [[0.0; 2]; 2]));
                worst = worst.max(diff);
                rows.push(MmsRow {
                    parameter: n as f64,
                    dofs: sys.n_free(),
                    velocity_h1: dh1,
                    velocity_l2: dl2,
                    pressure_l2: f64::NAN,
                    wall_stress: max_wall_stress(&slip),
                });
            }
            Ok(MmsTable {
                case,
                rows,
                h1_rates: Vec::new(),
                pressure_rates: Vec::new(),
                pass: worst <= 1e-8,
                verdict: format!("largest nodal difference to the no-slip run {worst:.3e} (required <= 1e-8)"),
            })
        }
        MmsCase::PoiseuilleSlipZeroGLimit => {
            let n = 8;
            let mut gs: Vec<f64> = (0..levels + 1).map(|k| 10f64.powi(-(k as i32))).collect();
            gs.push(0.0);
            let mut rows = Vec::new();
            for &g in &gs {
                let (sys, sol) = run(&channel(n, Some(g))?, &opts())?;
                rows.push(MmsRow {
                    parameter: g,
                    dofs: sys.n_free(),
                    velocity_h1: f64::NAN,
                    velocity_l2: f64::NAN,
                    pressure_l2: f64::NAN,
                    wall_stress: max_wall_stress(&sol),
                });
            }
            let stress: Vec<f64> = rows.iter().map(|r| r.wall_stress).collect();
            let monotone = stress.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-14);
            let last = *stress.last().unwrap_or(&f64::NAN);
            Ok(MmsTable {
                case,
                rows,
                h1_rates: Vec::new(),
                pressure_rates: Vec::new(),
                pass: monotone && last.abs() <= 1e-10,
                verdict: format!(
                    "wall stress {} in g, {last:.3e} at g = 0",
                    if monotone { "monotone" } else { "NOT monotone" }
                ),
            })
        }
    }
}

fn max_wall_stress(sol: &crate::flow::FlowSolution) -> f64 {
    sol.multipliers
        .as_ref()
        .map(|m| m.sigma_tau.iter().map(|e| e.sigma.abs()).fold(0.0, f64::max))
        .unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_names_round_trip() {
        for c in MmsCase::ALL {
            assert_eq!(c.name().parse::<MmsCase>().unwrap(), c);
        }
        assert!("nope".parse::<MmsCase>().is_err());
    }

    #[test]
    fn dirichlet_rates_are_quadratic() {
        let t = run_mms(MmsCase::PoiseuilleDirichlet, 2).unwrap();
        assert!(t.pass, "{t}");
    }

    #[test]
    fn large_threshold_sticks() {
        let t = run_mms(MmsCase::PoiseuilleSlipLargeG, 1).unwrap();
        assert!(t.pass, "{t}");
    }

    #[test]
    fn wall_stress_follows_threshold() {
        let t = run_mms(MmsCase::PoiseuilleSlipZeroGLimit, 3).unwrap();
        assert!(t.pass, "{t}");
    }
}
