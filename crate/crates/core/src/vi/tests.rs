use super::*;
use crate::functional::FunctionalTerm;
use crate::mesh::PatchKind;
use nalgebra::DMatrix;

fn term(dof: usize, kind: PatchKind, g: f64) -> FunctionalTerm {
    FunctionalTerm {
        dof,
        sign: 1.0,
        weight: 1.0,
        g,
        kind,
        edge: 0,
        node: 0,
    }
}

fn dense(n: usize, v: &[f64]) -> CsrMatrix {
    CsrMatrix::from_dense(&DMatrix::from_row_slice(n, n, v))
}

fn solve1(alpha: f64, f: f64, kind: PatchKind, g: f64) -> f64 {
    let a = dense(1, &[alpha]);
    let spec = FunctionalSpec::new(1, vec![term(0, kind, g)]).unwrap();
    let cone = spec.cone().unwrap();
    let s = solve_convex_vi(
        &a,
        &CsrMatrix::zeros(0, 1),
        &[f],
        &spec,
        &cone,
        &InnerOptions::default(),
        None,
    )
    .unwrap();
    assert!(s.converged);
    s.u[0]
}

#[test]
fn soft_threshold_closed_form() {
    assert!((solve1(2.0, 3.0, PatchKind::TrescaSlip, 1.0) - 1.0).abs() < 1e-14);
    assert!((solve1(2.0, -3.0, PatchKind::Leak, 1.0) + 1.0).abs() < 1e-14);
    assert_eq!(solve1(2.0, 0.5, PatchKind::TrescaSlip, 1.0), 0.0);
}

#[test]
fn one_sided_closed_form() {
    assert_eq!(solve1(1.0, 1.0, PatchKind::OutflowLeak, 2.0), 0.0);
    assert!((solve1(1.0, 5.0, PatchKind::OutflowLeak, 2.0) - 3.0).abs() < 1e-14);
    assert!((solve1(1.0, -5.0, PatchKind::InflowLeak, 2.0) + 3.0).abs() < 1e-14);
    assert_eq!(solve1(1.0, 5.0, PatchKind::InflowLeak, 2.0), 0.0);
}

#[test]
fn zero_load_gives_zero() {
    let a = dense(2, &[2.0, 0.5, 0.5, 1.0]);
    let spec = FunctionalSpec::new(
        2,
        vec![
            term(0, PatchKind::TrescaSlip, 1.0),
            term(1, PatchKind::OutflowLeak, 1.0),
        ],
    )
    .unwrap();
    let cone = spec.cone().unwrap();
    let s = solve_convex_vi(
        &a,
        &CsrMatrix::zeros(0, 2),
        &[0.0, 0.0],
        &spec,
        &cone,
        &InnerOptions::default(),
        None,
    )
    .unwrap();
    assert_eq!(s.u, vec![0.0, 0.0]);
}

#[test]
fn divergence_block_is_enforced() {
    // minimize ½|u|² − F·u + |u_0| subject to u_0 + u_1 + u_2 = 0
    let a = CsrMatrix::identity(3);
    let b = CsrMatrix::from_dense(&DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]));
    let spec = FunctionalSpec::new(3, vec![term(0, PatchKind::TrescaSlip, 0.5)]).unwrap();
    let cone = spec.cone().unwrap();
    let f = [3.0, -1.0, -2.0];
    let s = solve_convex_vi(&a, &b, &f, &spec, &cone, &InnerOptions::default(), None).unwrap();
    assert!(s.converged);
    // slip: u0 = 3 − 0.5 − p, u1 = −1 − p, u2 = −2 − p, sum = 0 → p = −0.5/3
    let p = -0.5 / 3.0;
    assert!((s.u[0] - (2.5 - p)).abs() < 1e-13);
    assert!((s.u[0] + s.u[1] + s.u[2]).abs() < 1e-13);
    assert!(residual_free_pressure(&a, &b, &f, &spec.scalar_terms(&cone), &s.u) < 1e-12);
}

#[test]
fn residual_detects_wrong_point_and_scales() {
    let a = dense(2, &[2.0, 0.0, 0.0, 2.0]);
    let b = CsrMatrix::zeros(0, 2);
    let spec = FunctionalSpec::new(2, vec![]).unwrap();
    let terms = spec.scalar_terms(&ConeSpec::default());
    let r1 = residual_free_pressure(&a, &b, &[4.0, 1.0], &terms, &[0.0, 0.0]);
    assert_eq!(r1, 4.0);
    let r2 = residual_free_pressure(&a, &b, &[8.0, 2.0], &terms, &[0.0, 0.0]);
    assert_eq!(r2, 8.0);
}

#[test]
fn contraction_radius_roots() {
    let r = contraction_radius(2.0, 1.0, 0.75).unwrap();
    assert!((r.radius - 0.5).abs() < 1e-15 && (r.contraction - 0.5).abs() < 1e-15 && r.in_regime);
    assert!(contraction_radius(1.0, 1.0, 1.0).is_none());
    let z = contraction_radius(2.0, 1.0, 0.0).unwrap();
    assert_eq!(z.radius, 0.0);
}
