//! The four verbs. Each returns report lines and an overall verdict; errors
//! carry their exit code.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use viflow_core::flow::{run, FlowSolution, RunOptions};
use viflow_core::linalg::sub;
use viflow_core::mesh::{check_admissibility, compute_boundary_frames, Mesh, Severity};
use viflow_core::mms::{run_mms, MmsCase};
use viflow_core::problem::{AssembledSystem, Equation, ProblemSpec};
use viflow_core::vi::{ConvectionKind, RieszMap};

use crate::config::Loaded;
use crate::export::{export_all, write_report};
use crate::CliError;

#[derive(Clone, Debug, Default)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: usize,
    pub override_admissibility: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub pass: bool,
}

impl Outcome {
    fn push(&mut self, l: impl Into<String>) {
        self.lines.push(l.into());
    }

    /// Adds a verdict row and folds it into the overall verdict.
    fn verdict(&mut self, tag: &str, ok: bool, detail: impl AsRef<str>) {
        self.pass &= ok;
        self.push(format!(
            "{tag}: {} ({})",
            if ok { "PASS" } else { "FAIL" },
            detail.as_ref()
        ));
    }
}

fn load(c: &Common) -> Result<Loaded, CliError> {
    let path = c
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    Loaded::read(path)
}

fn run_options(l: &Loaded) -> Result<RunOptions, CliError> {
    Ok(RunOptions {
        scheme: l.config.scheme()?,
        solve: l.config.solve_options(),
        estimate: l.config.solver.estimate,
        ..Default::default()
    })
}

fn solve_spec(spec: &ProblemSpec, opts: &RunOptions) -> Solved {
    let (sys, sol) = run(spec, opts)?;
    if !sol.converged() {
        return Err(CliError::Solver(format!(
            "no convergence after {} outer iterations (residual {:.3e}){}",
            sol.report.outer_iterations,
            sol.report.final_residual,
            sol.report.notes.iter().map(|n| format!("; {n}")).collect::<String>()
        )));
    }
    Ok((sys, sol))
}

type Solved = Result<(AssembledSystem, FlowSolution), CliError>;

/// Runs independent solves on up to `threads` workers; results keep the
/// input order.
fn run_many(specs: Vec<ProblemSpec>, opts: &RunOptions, threads: usize) -> Vec<Solved> {
    let n = specs.len();
    let slots: Vec<Mutex<Option<Solved>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        if i >= n {
            break;
        }
        let r = solve_spec(&specs[i], opts);
        *slots[i].lock().expect("slot") = Some(r);
    };
    let t = threads.clamp(1, n.max(1));
    if t == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..t {
                s.spawn(work);
            }
        });
    }
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot").expect("every slot is filled"))
        .collect()
}

fn describe(sys: &AssembledSystem, sol: &FlowSolution, o: &mut Outcome) {
    let r = &sol.report;
    o.push(format!(
        "system: {} equation, {} free velocity dofs, {} pressure constraints, scheme {}",
        match sys.spec.equation {
            Equation::Stokes => "stokes",
            Equation::NavierStokesStatic => "navier-stokes-static",
            Equation::NavierStokesTotal => "navier-stokes-total",
        },
        sys.n_free(),
        sys.vi.b.nrows(),
        r.scheme
    ));
    o.push(format!(
        "convergence: {} outer iterations, VI residual {:.3e}, {:.3}s",
        r.outer_iterations,
        r.final_residual,
        r.wall_time.as_secs_f64()
    ));
    for n in &r.notes {
        o.push(format!("note: {n}"));
    }
}

fn estimate_rows(sys: &AssembledSystem, sol: &FlowSolution, o: &mut Outcome) {
    match (&sol.estimate, &sys.vi.constants) {
        (Some(e), Some(c)) => {
            o.verdict(
                "energy-estimate",
                e.energy.holds,
                format!(
                    "|w|_H1 = {:.6e} <= |F|*/alpha = {:.6e}, alpha = {:.4e}",
                    e.energy.norm, e.energy.bound, c.alpha
                ),
            );
            if sys.vi.convection.kind() != ConvectionKind::None {
                o.push(format!(
                    "uniqueness-condition: K|F|*/alpha^2 = {:.4e} ({})",
                    e.uniqueness_value,
                    if e.uniqueness_guaranteed {
                        "unique"
                    } else {
                        "uniqueness not guaranteed"
                    }
                ));
            }
        }
        _ => o.push("energy-estimate: SKIP (constants not estimated)"),
    }
}

fn complementarity_rows(sol: &FlowSolution, o: &mut Outcome) {
    match (&sol.multipliers, &sol.complementarity) {
        (Some(m), Some(c)) => {
            if m.entries().next().is_none() {
                o.push("complementarity: SKIP (no friction patches)");
                return;
            }
            let worst = c.violations.iter().max_by(|a, b| a.max.total_cmp(&b.max));
            let at = worst
                .map(|v| format!(", worst {} {:.3e}", v.condition.name(), v.max))
                .unwrap_or_default();
            o.verdict("complementarity", c.pass, format!("tol {:.3e}{at}", c.tol));
            o.push(format!("multiplier-balance: residual {:.3e}", m.equation_residual));
        }
        _ => o.verdict("complementarity", false, "multipliers not recovered"),
    }
}

pub fn solve(c: &Common) -> Result<Outcome, CliError> {
    let l = load(c)?;
    let spec = l.spec(c.override_admissibility)?;
    let opts = run_options(&l)?;
    let (sys, sol) = solve_spec(&spec, &opts)?;
    let mut o = Outcome {
        pass: true,
        ..Default::default()
    };
    describe(&sys, &sol, &mut o);
    estimate_rows(&sys, &sol, &mut o);
    complementarity_rows(&sol, &mut o);
    let dir = l.output_dir(c.out.as_deref());
    let files = export_all(&dir, &l.config.output.formats, &sys, &sol, &l.hash)?;
    for f in &files {
        o.push(format!("wrote {}", f.display()));
    }
    let report = dir.join("report.txt");
    o.push(format!("wrote {}", report.display()));
    o.push(format!("overall: {}", if o.pass { "PASS" } else { "FAIL" }));
    write_report(&report, &o.lines, &l.hash)?;
    Ok(o)
}

pub fn check(c: &Common) -> Result<Outcome, CliError> {
    let l = load(c)?;
    let base = l.spec(c.override_admissibility)?;
    let mut opts = run_options(&l)?;
    opts.estimate = true;
    let (sys, sol) = solve_spec(&base, &opts)?;
    let mut o = Outcome {
        pass: true,
        ..Default::default()
    };
    describe(&sys, &sol, &mut o);
    estimate_rows(&sys, &sol, &mut o);
    complementarity_rows(&sol, &mut o);

    let Some(c0) = sys.vi.constants.clone() else {
        o.push("threshold-sweep: SKIP (constants not estimated)");
        o.push("data-lipschitz: SKIP (constants not estimated)");
        return finish_check(&l, c, o);
    };
    let bound0 = c0.energy_bound();

    let has_friction = base.patches.iter().any(|p| p.kind.is_friction());
    if has_friction {
        let factors = l.config.check.sweep.clone();
        let specs = factors
            .iter()
            .map(|&s| {
                let mut spec = base.clone();
                for p in &mut spec.patches {
                    if p.kind.is_friction() {
                        *p = p.clone().with_threshold(p.threshold().scaled(s));
                    }
                }
                spec
            })
            .collect();
        let mut ok = true;
        let mut parts = Vec::new();
        for (s, r) in factors.iter().zip(run_many(specs, &opts, c.threads)) {
            let (_, sol) = r?;
            match sol.estimate {
                Some(e) => {
                    let same = e.energy.bound.to_bits() == bound0.to_bits();
                    ok &= same && e.energy.holds;
                    parts.push(format!(
                        "x{s}: bound {:.6e}{} norm {:.4e}",
                        e.energy.bound,
                        if same { "" } else { " (changed)" },
                        e.energy.norm
                    ));
                }
                None => {
                    ok = false;
                    parts.push(format!("x{s}: no estimate"));
                }
            }
        }
        o.verdict("threshold-sweep", ok, parts.join("; "));
    } else {
        o.push("threshold-sweep: SKIP (no friction patches)");
    }

    if base.equation == Equation::Stokes {
        let k = l.config.check.load_factor;
        let mut pert = base.clone();
        pert.force = base.force.scaled(k);
        for p in &mut pert.patches {
            if p.kind.is_friction() {
                *p = p.clone().with_threshold(p.threshold().scaled(k));
            }
        }
        let mut res = run_many(vec![pert], &opts, 1);
        let (sys2, sol2) = res.remove(0)?;
        let riesz = RieszMap::new(&sys.vi.h, &sys.vi.b)?;
        let df = riesz.dual_norm(&sub(&sys2.vi.f, &sys.vi.f));
        let dg = sys
            .vi
            .functional
            .terms
            .iter()
            .zip(&sys2.vi.functional.terms)
            .map(|(a, b)| a.weight * (a.g - b.g).powi(2))
            .sum::<f64>()
            .sqrt();
        let bound = (df + c0.trace_constant * dg) / c0.alpha;
        let dw = sys.vi.h1_norm(&sub(&sol2.w, &sol.w));
        o.verdict(
            "data-lipschitz",
            dw <= bound * (1.0 + 1e-8) + 1e-14,
            format!("force and thresholds x{k}: |dw|_H1 = {dw:.6e} <= (|dF|* + C_tr |dg|)/alpha = {bound:.6e}"),
        );
    } else {
        o.push("data-lipschitz: SKIP (stokes only)");
    }
    finish_check(&l, c, o)
}

fn finish_check(l: &Loaded, c: &Common, mut o: Outcome) -> Result<Outcome, CliError> {
    o.push(format!("overall: {}", if o.pass { "PASS" } else { "FAIL" }));
    if let Some(dir) = &c.out {
        write_report(&dir.join("check.txt"), &o.lines, &l.hash)?;
    }
    Ok(o)
}

pub fn mms(c: &Common, case: Option<&str>, levels: Option<usize>) -> Result<Outcome, CliError> {
    let (case, cfg_levels, hash) = match (case, &c.config) {
        (Some(s), _) => (s.parse::<MmsCase>()?, None, None),
        (None, Some(_)) => {
            let l = load(c)?;
            let case = l
                .config
                .mms_case()?
                .ok_or_else(|| CliError::Config("missing [mms] section".into()))?;
            (case, l.config.mms.as_ref().map(|m| m.levels), Some(l.hash))
        }
        (None, None) => return Err(CliError::Usage("mms needs --config or --case".into())),
    };
    let levels = levels.or(cfg_levels).unwrap_or(3);
    let table = run_mms(case, levels)?;
    let mut o = Outcome {
        pass: table.pass,
        ..Default::default()
    };
    o.lines.extend(table.to_string().lines().map(str::to_string));
    o.push(format!(
        "manufactured-study: {}",
        if table.pass { "PASS" } else { "FAIL" }
    ));
    if let Some(dir) = &c.out {
        write_report(&dir.join("mms.txt"), &o.lines, hash.as_deref().unwrap_or("none"))?;
    }
    Ok(o)
}

pub fn validate_mesh(c: &Common, mesh_path: Option<&Path>) -> Result<Outcome, CliError> {
    let (mesh, patches, override_adm) = match (mesh_path, &c.config) {
        (Some(p), _) => (Mesh::load(p)?, None, c.override_admissibility),
        (None, Some(_)) => {
            let l = load(c)?;
            let spec = l.spec(c.override_admissibility)?;
            (spec.mesh, Some(spec.patches), spec.override_admissibility)
        }
        (None, None) => return Err(CliError::Usage("validate-mesh needs --mesh or --config".into())),
    };
    let mut o = Outcome {
        pass: true,
        ..Default::default()
    };
    o.push(format!(
        "mesh: {} nodes, {} triangles, {} boundary edges, {} boundary loops, area {:.6e}",
        mesh.nodes().len(),
        mesh.triangles().len(),
        mesh.boundary_edges().len(),
        mesh.boundary_loops().len(),
        mesh.area()
    ));
    let tags = mesh.tags();
    let counts: Vec<String> = tags
        .iter()
        .map(|t| {
            format!(
                "{t} ({} edges)",
                mesh.boundary_edges().iter().filter(|e| e.tag == *t).count()
            )
        })
        .collect();
    o.push(format!("tags: {}", counts.join(", ")));
    let geom = compute_boundary_frames(&mesh)?;
    let kmax = geom.edges().iter().map(|e| e.kappa.abs()).fold(0.0, f64::max);
    o.push(format!("frames: ok, max edge curvature {kmax:.4e}"));
    if let Some(patches) = patches {
        let r = check_admissibility(&mesh, &patches);
        for l in r.to_string().lines() {
            o.push(l.to_string());
        }
        let ok = match r.worst() {
            Some(Severity::Error) => false,
            Some(Severity::Warning) => override_adm,
            _ => true,
        };
        o.verdict("admissibility", ok, format!("{} diagnostics", r.diagnostics.len()));
    }
    Ok(o)
}
