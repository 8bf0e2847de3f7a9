//! Acceptance suite: one verdict line per criterion, nonzero exit on any
//! failure.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use viflow_core::benchmarks::{benchmark_set, channel_slip, Benchmark};
use viflow_core::flow::{run, FlowSolution, RunOptions};
use viflow_core::functional::{FunctionalSpec, FunctionalTerm};
use viflow_core::linalg::{sub, CsrMatrix};
use viflow_core::mesh::{
    compute_boundary_frames, identity_residual, structured_disk, unit_square, BoundaryPatch, Identity, PatchKind,
    Point, RectSide, ScalarField, VectorField,
};
use viflow_core::mms::{run_mms, MmsCase};
use viflow_core::problem::{AssembledSystem, Equation, ProblemSpec};
use viflow_core::vi::{
    contraction_radius, frozen_convection_picard, galerkin_regularized_path, oseen_fixed_point, solve_convex_vi,
    Convection, ConvectionKind, DiscreteVI, EstimateOptions, InnerOptions, RieszMap, SolveOptions,
};
use viflow_oracle::{
    active_set_enumeration, proximal_gradient_reference, random_instance, DofLaw, InstanceParams, ProxOptions,
    SmallInstance,
};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

fn h_distance(vi: &DiscreteVI, a: &[f64], b: &[f64]) -> f64 {
    vi.h1_norm(&sub(a, b))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Solves every benchmark once; shared by the energy and complementarity
/// criteria.
fn solved_benchmarks() -> Result<Vec<(Benchmark, AssembledSystem, FlowSolution)>, String> {
    benchmark_set()
        .map_err(fail)?
        .into_iter()
        .map(|b| {
            let (sys, sol) = run(&b.spec, &RunOptions::default()).map_err(|e| format!("{}: {e}", b.name))?;
            Ok((b, sys, sol))
        })
        .collect()
}

// ---------------------------------------------------------------------------

fn instance_to_vi(inst: &SmallInstance) -> (CsrMatrix, CsrMatrix, Vec<f64>, FunctionalSpec) {
    let n = inst.n();
    let terms = inst
        .laws
        .iter()
        .enumerate()
        .filter_map(|(dof, law)| {
            let (kind, g) = match *law {
                DofLaw::Free => return None,
                DofLaw::Abs(g) => (PatchKind::TrescaSlip, g),
                DofLaw::Outflow(g) => (PatchKind::OutflowLeak, g),
                DofLaw::Inflow(g) => (PatchKind::InflowLeak, g),
            };
            Some(FunctionalTerm {
                dof,
                sign: 1.0,
                weight: 1.0,
                g,
                kind,
                edge: 0,
                node: dof,
            })
        })
        .collect();
    (
        CsrMatrix::from_dense(&inst.a),
        CsrMatrix::zeros(0, n),
        inst.f.iter().copied().collect(),
        FunctionalSpec::new(n, terms).expect("valid terms"),
    )
}

fn oracle_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut count = 0;
    let cases = (0..200).map(|_| 8).chain((0..20).map(|_| 50));
    for (k, n_max) in cases.enumerate() {
        let n = if n_max == 8 {
            rng.random_range(1..=8)
        } else {
            rng.random_range(9..=50)
        };
        let constrained = rng.random_range(0..=n.min(8));
        let symmetric = k % 2 == 0;
        let inst = random_instance(
            1000 + k as u64,
            InstanceParams {
                n,
                constrained,
                symmetric,
                skew: 0.5,
            },
        );
        let (a, b, f, spec) = instance_to_vi(&inst);
        let cone = spec.cone().map_err(fail)?;
        let sol = solve_convex_vi(&a, &b, &f, &spec, &cone, &InnerOptions::default(), None).map_err(fail)?;
        let u = DVector::from_vec(sol.u);
        let prox = proximal_gradient_reference(&inst, &ProxOptions::default());
        let exact = active_set_enumeration(&inst).map_err(|e| format!("instance {k}: {e}"))?;
        let gap = inst
            .energy_distance(&u, &prox.u)
            .max(inst.energy_distance(&u, &exact.u));
        worst = worst.max(gap);
        count += 1;
    }
    check(
        worst <= 1e-6,
        format!("max energy-norm gap to both oracles {worst:.2e} over {count} instances (tol 1e-6)"),
    )
}

fn energy_estimate(runs: &[(Benchmark, AssembledSystem, FlowSolution)]) -> Verdict {
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for (b, _, sol) in runs {
        let Some(e) = &sol.estimate else {
            bad.push(format!("{}: no estimate", b.name));
            continue;
        };
        if !sol.converged() {
            bad.push(format!("{}: not converged", b.name));
        }
        let ratio = e.energy.norm / e.energy.bound;
        worst = worst.max(ratio);
        if e.energy.norm > e.energy.bound * (1.0 + 1e-8) {
            bad.push(format!("{}: norm/bound {ratio:.4}", b.name));
        }
    }
    check(
        bad.is_empty(),
        format!("{} configs, max norm/bound {worst:.4}{}", runs.len(), suffix(&bad)),
    )
}

fn suffix(bad: &[String]) -> String {
    if bad.is_empty() {
        String::new()
    } else {
        format!("; failures: {}", bad.join(", "))
    }
}

fn with_scaled_thresholds(spec: &ProblemSpec, s: f64) -> ProblemSpec {
    let mut out = spec.clone();
    for p in &mut out.patches {
        if p.kind.is_friction() {
            *p = p.clone().with_threshold(p.threshold().scaled(s));
        }
    }
    out
}

fn threshold_independence() -> Verdict {
    let mut bad = Vec::new();
    let mut n = 0;
    for b in benchmark_set().map_err(fail)? {
        let mut bounds = Vec::new();
        for s in [1.0, 10.0, 100.0] {
            let spec = with_scaled_thresholds(&b.spec, s);
            let (_, sol) = run(&spec, &RunOptions::default()).map_err(|e| format!("{} x{s}: {e}", b.name))?;
            let e = sol.estimate.ok_or_else(|| format!("{}: no estimate", b.name))?;
            if !sol.report.converged || e.energy.norm > e.energy.bound * (1.0 + 1e-8) {
                bad.push(format!(
                    "{} x{s}: norm {:.4e} bound {:.4e}",
                    b.name, e.energy.norm, e.energy.bound
                ));
            }
            bounds.push(e.energy.bound);
            n += 1;
        }
        if bounds.iter().any(|x| x.to_bits() != bounds[0].to_bits()) {
            bad.push(format!("{}: bound varies {bounds:?}", b.name));
        }
    }
    check(
        bad.is_empty(),
        format!(
            "{n} solves over g, 10g, 100g: bound bit-identical per config, norm below it{}",
            suffix(&bad)
        ),
    )
}

fn complementarity(runs: &[(Benchmark, AssembledSystem, FlowSolution)]) -> Verdict {
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for (b, _, sol) in runs {
        match &sol.complementarity {
            None => bad.push(format!("{}: no multipliers", b.name)),
            Some(r) => {
                let v = r.worst() / r.tol * 1e-6;
                worst = worst.max(v);
                if !r.pass {
                    bad.push(format!("{}: {r}", b.name));
                }
            }
        }
    }
    check(
        bad.is_empty(),
        format!(
            "{} configs incl. all four friction kinds together, max violation {worst:.2e} x threshold scale (tol 1e-6){}",
            runs.len(),
            suffix(&bad)
        ),
    )
}

fn small_data_spec() -> Result<ProblemSpec, String> {
    let mut spec = channel_slip(Equation::NavierStokesStatic, 8, 4, 0.05).map_err(fail)?;
    spec.nu = 1.0;
    Ok(spec)
}

fn uniqueness_regime() -> Verdict {
    let spec = small_data_spec()?;
    let (sys, _) = run(&spec, &RunOptions::default()).map_err(fail)?;
    let c = sys.vi.constants.clone().ok_or("no constants")?;
    let cond = c.uniqueness_value();
    let opts = SolveOptions::default();
    let a = oseen_fixed_point(&sys.vi, &opts).map_err(fail)?;
    let b = frozen_convection_picard(&sys.vi, &opts).map_err(fail)?;
    let diff = h_distance(&sys.vi, &a.w, &b.w);
    let rho = b.report.observed_contraction().unwrap_or(0.0);
    check(
        cond < 1.0 && a.report.converged && b.report.converged && diff <= 10.0 * opts.tol && rho <= cond + 0.1,
        format!(
            "condition value {cond:.3e}, Oseen vs Picard {diff:.2e} (tol {:.0e}), contraction {rho:.3e}",
            10.0 * opts.tol
        ),
    )
}

/// `a1(w, u, v) = w₁(u₁v₂ − u₂v₁)`, skew in `(u, v)` with constant 1.
#[derive(Debug)]
struct RotationForm;

impl Convection for RotationForm {
    fn kind(&self) -> ConvectionKind {
        ConvectionKind::Advective
    }
    fn dim(&self) -> usize {
        2
    }
    fn oseen(&self, w: &[f64]) -> CsrMatrix {
        CsrMatrix::from_dense(&nalgebra::dmatrix![0.0, -w[0]; w[0], 0.0])
    }
    fn transport(&self, w: &[f64]) -> CsrMatrix {
        CsrMatrix::from_dense(&nalgebra::dmatrix![-w[1], 0.0; w[0], 0.0])
    }
    fn grad_first(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        vec![u[0] * v[1] - u[1] * v[0], 0.0]
    }
}

fn contraction_radius_check() -> Verdict {
    let info = contraction_radius(2.0, 1.0, 0.75).ok_or("no real radius")?;
    let mut vi = DiscreteVI::new(
        CsrMatrix::from_diagonal(&[2.0, 2.0]),
        CsrMatrix::zeros(0, 2),
        vec![0.75, 0.0],
        CsrMatrix::identity(2),
        Arc::new(RotationForm),
        FunctionalSpec::new(2, Vec::new()).map_err(fail)?,
    )
    .map_err(fail)?;
    vi.estimate(&EstimateOptions::default(), false).map_err(fail)?;
    let c = vi.constants.clone().unwrap();
    let sol = frozen_convection_picard(&vi, &SolveOptions::default()).map_err(fail)?;
    let r = sol.report.radius.ok_or("no radius in report")?;
    let ok = (info.radius - 0.5).abs() < 1e-15
        && (info.contraction - 0.5).abs() < 1e-15
        && (c.alpha - 2.0).abs() < 1e-12
        && (c.k_conv - 1.0).abs() < 1e-6
        && (c.dual_norm_f - 0.75).abs() < 1e-12
        && (r.radius - 0.5).abs() < 1e-6
        && sol.report.ball_exits == 0
        && sol.report.converged;
    check(
        ok,
        format!(
            "M = {:.6}, 2KM/alpha = {:.6}; estimated (alpha, K, |F|) = ({:.4}, {:.4}, {:.4}); {} iterates, {} outside the ball",
            info.radius, info.contraction, c.alpha, c.k_conv, c.dual_norm_f, sol.report.outer_iterations, sol.report.ball_exits
        ),
    )
}

fn regularization() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut gap_ok = true;
    let mut worst_gap = 0.0f64;
    for b in benchmark_set().map_err(fail)? {
        let sys = viflow_core::problem::assemble(&b.spec).map_err(fail)?;
        let j = &sys.vi.functional;
        for _ in 0..20 {
            let u: Vec<f64> = (0..sys.vi.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let u = sys.vi.cone.project(&u);
            let eps = 10f64.powf(rng.random_range(-4.0..0.0));
            let d = (j.eval(&u, &sys.vi.cone) - j.eval_eps(&u, eps).map_err(fail)?).abs();
            let bound = 0.5 * eps * j.total_threshold();
            worst_gap = worst_gap.max(d / bound.max(f64::MIN_POSITIVE));
            gap_ok &= d <= bound * (1.0 + 1e-12) + 1e-15;
        }
    }
    let mut details = Vec::new();
    let mut path_ok = true;
    // full slip, then full stick (wall stress 0.1 < g)
    for g in [0.05, 0.2] {
        let spec = channel_slip(Equation::Stokes, 8, 4, g).map_err(fail)?;
        let (sys, exact) = run(&spec, &RunOptions::default()).map_err(fail)?;
        let path = galerkin_regularized_path(&sys.vi, &SolveOptions::default()).map_err(fail)?;
        let gaps: Vec<f64> = path
            .path_solutions
            .iter()
            .map(|v| h_distance(&sys.vi, v, &exact.w))
            .collect();
        let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
        let last = gaps.last().copied().unwrap_or(f64::INFINITY);
        path_ok &= path.report.converged && monotone && last <= 1e-4;
        details.push(format!(
            "g = {g}: {} halvings {}, H1 gap {:.2e} -> {last:.2e}",
            gaps.len(),
            if monotone { "monotone" } else { "NOT monotone" },
            gaps.first().copied().unwrap_or(f64::NAN)
        ));
    }
    check(
        gap_ok && path_ok,
        format!(
            "|J_eps - J| / (eps/2 int g) max {worst_gap:.3}; {} (final tol 1e-4)",
            details.join("; ")
        ),
    )
}

fn edit(spec: &ProblemSpec, tag: u8, f: impl FnOnce(BoundaryPatch) -> BoundaryPatch) -> ProblemSpec {
    let mut out = spec.clone();
    if let Some(p) = out.patches.iter_mut().find(|p| p.tag == tag) {
        *p = f(p.clone());
    }
    out
}

fn data_lipschitz() -> Verdict {
    let set = benchmark_set().map_err(fail)?;
    let find = |n: &str| {
        set.iter()
            .find(|b| b.name == n)
            .map(|b| b.spec.clone())
            .ok_or(format!("missing {n}"))
    };
    let mixed = find("stokes/mixed")?;
    let outflow = find("stokes/outflow-leak")?;
    let bump = |d: f64| {
        move |p: BoundaryPatch| {
            let g = p.threshold();
            p.with_threshold(ScalarField::new(move |x| g.eval(x) + d * (1.0 + x[0])))
        }
    };
    let mut scaled_force = mixed.clone();
    scaled_force.force = mixed.force.scaled(1.25);
    let directions: Vec<(&str, ProblemSpec, ProblemSpec)> = vec![
        ("force", mixed.clone(), scaled_force),
        ("tangential threshold", mixed.clone(), edit(&mixed, 8, bump(0.03))),
        ("normal threshold", mixed.clone(), edit(&mixed, 9, bump(-0.02))),
        ("outflow threshold", mixed.clone(), edit(&mixed, 10, bump(0.04))),
        ("inflow threshold", mixed.clone(), edit(&mixed, 11, bump(0.05))),
        (
            "boundary pressure",
            outflow.clone(),
            edit(&outflow, 2, |p| {
                p.with_phi_normal(ScalarField::new(|x| 0.05 * (1.0 + x[1])))
            }),
        ),
    ];
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for (name, base, pert) in &directions {
        let (s0, r0) = run(base, &RunOptions::default()).map_err(fail)?;
        let (s1, r1) = run(pert, &RunOptions::default()).map_err(fail)?;
        let c = s0.vi.constants.as_ref().ok_or("no constants")?;
        let riesz = RieszMap::new(&s0.vi.h, &s0.vi.b).map_err(fail)?;
        let df = riesz.dual_norm(&sub(&s1.vi.f, &s0.vi.f));
        let dg = s0
            .vi
            .functional
            .terms
            .iter()
            .zip(&s1.vi.functional.terms)
            .map(|(a, b)| a.weight * (a.g - b.g).powi(2))
            .sum::<f64>()
            .sqrt();
        let bound = (df + c.trace_constant * dg) / c.alpha;
        let dw = h_distance(&s0.vi, &r1.w, &r0.w);
        worst = worst.max(dw / bound);
        if !(dw > 0.0 && dw <= bound * (1.0 + 1e-8)) {
            bad.push(format!("{name}: change {dw:.3e} vs bound {bound:.3e}"));
        }
    }
    check(
        bad.is_empty(),
        format!(
            "{} perturbation directions, max change/bound {worst:.3}{}",
            directions.len(),
            suffix(&bad)
        ),
    )
}

fn geometry_identities() -> Verdict {
    type Field = fn(Point) -> ([f64; 2], [[f64; 2]; 2]);
    // (1 + r²)(−y, x): tangential on circles
    let swirl: Field = |p| {
        let s = 1.0 + p[0] * p[0] + p[1] * p[1];
        let (x, y) = (p[0], p[1]);
        (
            [-s * y, s * x],
            [[-2.0 * x * y, -s - 2.0 * y * y], [s + 2.0 * x * x, 2.0 * x * y]],
        )
    };
    // (1 + r²)(x, y): normal on circles
    let radial: Field = |p| {
        let s = 1.0 + p[0] * p[0] + p[1] * p[1];
        let (x, y) = (p[0], p[1]);
        (
            [s * x, s * y],
            [[s + 2.0 * x * x, 2.0 * x * y], [2.0 * x * y, s + 2.0 * y * y]],
        )
    };
    let mut rows = Vec::new();
    for rings in [8usize, 16, 32] {
        let mesh = structured_disk(rings, 8, 1.0, |_| 8).map_err(fail)?;
        let geom = compute_boundary_frames(&mesh).map_err(fail)?;
        let a = identity_residual(&mesh, &geom, &swirl, 8, Identity::ShearTraction).map_err(fail)?;
        let b = identity_residual(&mesh, &geom, &radial, 8, Identity::NormalTraction).map_err(fail)?;
        rows.push((8 * rings, a, b));
    }
    let decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1 && w[1].2 < w[0].2);
    let (_, a, b) = *rows.last().unwrap();
    check(
        decreasing && a <= 5e-3 && b <= 5e-3,
        format!(
            "{}; 256-gon tol 5e-3, {}",
            rows.iter()
                .map(|(n, a, b)| format!("{n}-gon shear {a:.2e} normal {b:.2e}"))
                .collect::<Vec<_>>()
                .join(", "),
            if decreasing { "decreasing" } else { "NOT decreasing" }
        ),
    )
}

fn lid_box(bottom: BoundaryPatch) -> Result<ProblemSpec, String> {
    let tag = bottom.tag;
    let mesh = unit_square(6, 6, |s, _| match s {
        RectSide::Top => 3,
        RectSide::Bottom => tag,
        _ => 1,
    })
    .map_err(fail)?;
    let lid = VectorField::new(
        ScalarField::new(|p| 16.0 * p[0] * p[0] * (1.0 - p[0]) * (1.0 - p[0])),
        ScalarField::constant(0.0),
    );
    let mut patches = vec![
        BoundaryPatch::new(1, PatchKind::Velocity),
        BoundaryPatch::new(3, PatchKind::Velocity).with_velocity(lid),
    ];
    if tag != 1 {
        patches.push(bottom);
    }
    Ok(
        ProblemSpec::new(mesh, patches, 0.1, Equation::Stokes).with_force(VectorField::new(
            ScalarField::constant(0.0),
            ScalarField::new(|p| -2.0 * p[0]),
        )),
    )
}

fn limit_consistency() -> Verdict {
    let large = run_mms(MmsCase::PoiseuilleSlipLargeG, 2).map_err(fail)?;
    let small = run_mms(MmsCase::PoiseuilleSlipZeroGLimit, 3).map_err(fail)?;
    let leak = lid_box(BoundaryPatch::new(9, PatchKind::Leak).with_threshold(ScalarField::constant(1e6)))?;
    let wall = lid_box(BoundaryPatch::new(1, PatchKind::Velocity))?;
    let (_, a) = run(&leak, &RunOptions::default()).map_err(fail)?;
    let (_, b) = run(&wall, &RunOptions::default()).map_err(fail)?;
    let leak_diff = max_abs_diff(&a.velocity, &b.velocity);
    check(
        large.pass && small.pass && leak_diff <= 1e-8,
        format!(
            "large tangential threshold: {}; vanishing threshold: {}; large normal threshold vs impermeable wall {leak_diff:.2e} (tol 1e-8)",
            large.verdict, small.verdict
        ),
    )
}

fn manufactured_convergence() -> Verdict {
    let t = run_mms(MmsCase::PoiseuilleDirichlet, 3).map_err(fail)?;
    let rates: Vec<String> = t.h1_rates.iter().map(|r| format!("{r:.3}")).collect();
    check(
        t.pass,
        format!("H1 velocity rates [{}]; {}", rates.join(", "), t.verdict),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let runs = solved_benchmarks();
    let shared = |f: fn(&[(Benchmark, AssembledSystem, FlowSolution)]) -> Verdict| match &runs {
        Ok(r) => f(r),
        Err(e) => Err(e.clone()),
    };
    type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("oracle-equivalence", Box::new(oracle_equivalence)),
        ("energy-estimate", Box::new(move || shared(energy_estimate))),
        ("threshold-independence", Box::new(threshold_independence)),
        ("complementarity", Box::new(move || shared(complementarity))),
        ("uniqueness-regime", Box::new(uniqueness_regime)),
        ("contraction-radius", Box::new(contraction_radius_check)),
        ("regularization", Box::new(regularization)),
        ("data-lipschitz", Box::new(data_lipschitz)),
        ("geometry-identities", Box::new(geometry_identities)),
        ("limit-consistency", Box::new(limit_consistency)),
        ("manufactured-convergence", Box::new(manufactured_convergence)),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = f();
        let secs = t.elapsed().as_secs_f64();
        match v {
            Ok(d) => println!("[{:>2}] {name}: PASS ({d}) [{secs:.1}s]", k + 1),
            Err(d) => {
                failed += 1;
                println!("[{:>2}] {name}: FAIL ({d}) [{secs:.1}s]", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
