//! Built-in benchmark configurations: every equation kind, every friction
//! kind, and a mixed run with all four friction kinds at once.
//!
//! Patch tags follow the kind numbers where a domain has one patch per kind.

use crate::error::Result;
use crate::mesh::{structured_rectangle, BoundaryPatch, Mesh, PatchKind, RectSide, ScalarField, VectorField};
use crate::problem::{Equation, ProblemSpec};

#[derive(Clone, Debug)]
pub struct Benchmark {
    pub name: String,
    pub spec: ProblemSpec,
}

fn patch(tag: u8, kind: PatchKind) -> BoundaryPatch {
    BoundaryPatch::new(tag, kind)
}

fn friction(tag: u8, kind: PatchKind, g: f64) -> BoundaryPatch {
    BoundaryPatch::new(tag, kind).with_threshold(ScalarField::constant(g))
}

/// `(amp·y(1−y), 0)`.
pub fn parabolic_inflow(amp: f64) -> VectorField {
    VectorField::new(
        ScalarField::new(move |p| amp * p[1] * (1.0 - p[1])).with_source(format!("{amp}*y*(1-y)")),
        ScalarField::constant(0.0),
    )
}

/// Lid profile vanishing at the corners.
fn lid(amp: f64) -> VectorField {
    VectorField::new(
        ScalarField::new(move |p| amp * 16.0 * p[0] * p[0] * (1.0 - p[0]) * (1.0 - p[0]))
            .with_source(format!("{amp}*16*x^2*(1-x)^2")),
        ScalarField::constant(0.0),
    )
}

/// Channel `[0,2]×[0,1]`: parabolic inflow on the left (tag 1), walls of
/// tag 8 (Tresca slip, threshold `g`) and a pressure outlet on the right
/// (tag 2).
pub fn channel_slip(equation: Equation, nx: usize, ny: usize, g: f64) -> Result<ProblemSpec> {
    let mesh = structured_rectangle([0.0, 2.0], [0.0, 1.0], nx, ny, |s, _| match s {
        RectSide::Left => 1,
        RectSide::Right => 2,
        _ => 8,
    })?;
    let mut spec = ProblemSpec::new(
        mesh,
        vec![
            patch(1, PatchKind::Velocity).with_velocity(parabolic_inflow(1.0)),
            patch(2, PatchKind::Pressure),
            friction(8, PatchKind::TrescaSlip, g),
        ],
        0.1,
        equation,
    );
    spec.override_admissibility = g <= 0.0;
    Ok(spec)
}

/// Unit-square cavity driven by a smooth lid (tag 1 on top and sides) with
/// the bottom carrying `bottom`.
fn cavity(equation: Equation, n: usize, nu: f64, bottom: BoundaryPatch, force: VectorField) -> Result<ProblemSpec> {
    let tag = bottom.tag;
    let mesh = structured_rectangle([0.0, 1.0], [0.0, 1.0], n, n, |s, _| match s {
        RectSide::Top => 3,
        RectSide::Bottom => tag,
        _ => 1,
    })?;
    Ok(ProblemSpec::new(
        mesh,
        vec![
            patch(1, PatchKind::Velocity),
            patch(3, PatchKind::Velocity).with_velocity(lid(1.0)),
            bottom,
        ],
        nu,
        equation,
    )
    .with_force(force))
}

/// `(a·x + b·y + c, d·x + e·y + f)` given as `[[a, b, c], [d, e, f]]`.
fn affine(m: [[f64; 3]; 2]) -> VectorField {
    let comp = |[a, b, c]: [f64; 3]| {
        ScalarField::new(move |p| a * p[0] + b * p[1] + c).with_source(format!("{a}*x + {b}*y + {c}"))
    };
    VectorField::new(comp(m[0]), comp(m[1]))
}

/// Channel `[0,2]×[0,1]` with walls, body force `force`, and the right
/// side split: `right_low` below `y = ½`, `right_high` above. `left` takes
/// tag 5 unless it is a wall.
#[allow(clippy::too_many_arguments)]
fn split_channel(
    equation: Equation,
    nx: usize,
    ny: usize,
    nu: f64,
    force: VectorField,
    left: Option<BoundaryPatch>,
    right_low: BoundaryPatch,
    right_high: BoundaryPatch,
) -> Result<ProblemSpec> {
    let (lo, hi) = (right_low.tag, right_high.tag);
    let left_tag = left.as_ref().map_or(1, |p| p.tag);
    let mesh = structured_rectangle([0.0, 2.0], [0.0, 1.0], nx, ny, |s, m| match s {
        RectSide::Right if m[1] < 0.5 => lo,
        RectSide::Right => hi,
        RectSide::Left if (0.25..0.75).contains(&m[1]) => left_tag,
        _ => 1,
    })?;
    let mut patches = vec![patch(1, PatchKind::Velocity), right_low, right_high];
    patches.extend(left);
    Ok(ProblemSpec::new(mesh, patches, nu, equation).with_force(force))
}

/// Mixed run: Tresca on the bottom middle, leak on the top middle, inflow
/// leak on the left middle and outflow leak on the right, each patch
/// separated from the others by wall segments.
pub fn mixed_friction(equation: Equation, nx: usize, ny: usize) -> Result<ProblemSpec> {
    let mid = |t: f64, a: f64, b: f64| (a..b).contains(&t);
    let mesh = structured_rectangle([0.0, 2.0], [0.0, 1.0], nx, ny, |s, m| match s {
        RectSide::Bottom if mid(m[0], 0.25, 1.75) => 8,
        RectSide::Top if mid(m[0], 1.0, 1.75) => 9,
        RectSide::Left if mid(m[1], 0.25, 0.75) => 11,
        RectSide::Right if mid(m[1], 0.25, 0.75) => 10,
        _ => 1,
    })?;
    Ok(ProblemSpec::new(
        mesh,
        vec![
            patch(1, PatchKind::Velocity),
            friction(8, PatchKind::TrescaSlip, 0.02),
            friction(9, PatchKind::Leak, 0.1),
            friction(10, PatchKind::OutflowLeak, 0.05),
            friction(11, PatchKind::InflowLeak, 0.1),
        ],
        0.1,
        equation,
    )
    .with_force(affine([[0.0, 1.0, 0.5], [-0.5, 0.0, 0.0]])))
}

/// Configurations per equation kind.
fn for_equation(eq: Equation) -> Result<Vec<Benchmark>> {
    let tag = match eq {
        Equation::Stokes => "stokes",
        Equation::NavierStokesStatic => "ns-static",
        Equation::NavierStokesTotal => "ns-total",
    };
    let out = vec![
        ("channel-slip", channel_slip(eq, 8, 4, 0.05)?),
        (
            "cavity-tresca",
            cavity(
                eq,
                6,
                0.1,
                friction(8, PatchKind::TrescaSlip, 0.05),
                VectorField::constant([0.0, 0.0]),
            )?,
        ),
        (
            "cavity-leak",
            cavity(
                eq,
                6,
                0.1,
                friction(9, PatchKind::Leak, 0.1),
                affine([[0.0, 0.0, 0.0], [-2.0, 0.0, 0.0]]),
            )?,
        ),
        (
            "outflow-leak",
            split_channel(
                eq,
                8,
                4,
                0.1,
                affine([[0.0, 2.0, 0.0], [0.0, 0.0, 0.0]]),
                None,
                patch(2, PatchKind::Pressure),
                friction(10, PatchKind::OutflowLeak, 0.02),
            )?,
        ),
        (
            "inflow-leak",
            split_channel(
                eq,
                8,
                4,
                0.1,
                affine([[0.0, 0.0, 0.3], [0.0, 0.0, 0.0]]),
                Some(friction(11, PatchKind::InflowLeak, 0.05)),
                patch(2, PatchKind::Pressure),
                patch(4, PatchKind::NormalStress),
            )?,
        ),
        ("mixed", mixed_friction(eq, 8, 4)?),
    ];
    Ok(out
        .into_iter()
        .map(|(n, spec)| Benchmark {
            name: format!("{tag}/{n}"),
            spec,
        })
        .collect())
}

/// The full benchmark set (18 configurations).
pub fn benchmark_set() -> Result<Vec<Benchmark>> {
    let mut all = Vec::new();
    for eq in [
        Equation::Stokes,
        Equation::NavierStokesStatic,
        Equation::NavierStokesTotal,
    ] {
        all.extend(for_equation(eq)?);
    }
    Ok(all)
}

/// Bundled mesh of the channel-slip example.
pub fn channel_mesh(nx: usize, ny: usize) -> Result<Mesh> {
    Ok(channel_slip(Equation::Stokes, nx, ny, 1.0)?.mesh)
}
