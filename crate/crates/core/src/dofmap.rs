//! Velocity/pressure numbering, boundary frames and essential constraints.
//!
//! Velocity dof `2·node + c` is component `c` of P2 node `node`: Cartesian
//! (x, y) at free nodes, (normal, tangential) at rotated nodes. Every
//! constraint of the velocity space is then a single fixed dof.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fem::{P2Nodes, SIMPSON};
use crate::linalg::{CsrMatrix, Triplets};
use crate::mesh::{BoundaryGeometry, BoundaryPatch, Frame, Mesh, PatchKind, Point};

/// Lumped contribution of one friction edge to one boundary dof.
#[derive(Clone, Copy, Debug)]
pub struct FrictionTerm {
    pub dof: usize,
    /// Physical trace = `sign · u[dof]` (tangential on kind 8, normal on 9–11,
    /// measured in the frame of the contributing edge).
    pub sign: f64,
    /// Lumped boundary weight (length units).
    pub weight: f64,
    /// Threshold at the node.
    pub g: f64,
    pub kind: PatchKind,
    pub edge: usize,
    pub node: usize,
}

#[derive(Clone, Debug)]
pub struct DofMap {
    pub nodes: P2Nodes,
    /// `None` for Cartesian nodes.
    pub frames: Vec<Option<Frame>>,
    /// Dofs fixed to zero in the homogeneous space.
    pub fixed: Vec<bool>,
    /// Dofs carrying essential data in the lifting problem.
    pub lifting_fixed: Vec<bool>,
    /// Prescribed lifting values (local frame), meaningful where
    /// `lifting_fixed`.
    pub lifting_values: Vec<f64>,
    pub friction: Vec<FrictionTerm>,
    /// Patch kind of each mesh boundary edge.
    pub edge_kinds: Vec<PatchKind>,
    pub n_pressure: usize,
    free: Vec<usize>,
    free_slot: Vec<Option<usize>>,
}

#[derive(Clone, Copy, Debug)]
struct Request {
    dir: [f64; 2],
    value: f64,
    in_space: bool,
    frame: Frame,
}

const PARALLEL_TOL: f64 = 1e-8;
const VALUE_TOL: f64 = 1e-10;

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Patch lookup by tag, rejecting missing and duplicate definitions.
pub fn patch_table<'a>(mesh: &Mesh, patches: &'a [BoundaryPatch]) -> Result<HashMap<u8, &'a BoundaryPatch>> {
    let mut table = HashMap::new();
    for p in patches {
        if table.insert(p.tag, p).is_some() {
            return Err(Error::InvalidPatch(format!("patch {} defined twice", p.tag)));
        }
    }
    for t in mesh.tags() {
        if !table.contains_key(&t) {
            return Err(Error::InvalidPatch(format!("boundary tag {t} has no patch definition")));
        }
    }
    Ok(table)
}

fn requests_for(patch: &BoundaryPatch, frame: Frame, x: Point) -> Vec<Request> {
    let d = &patch.data;
    let h = || d.h.as_ref().map_or(0.0, |h| h.eval(x));
    let r = |dir, value, in_space| Request {
        dir,
        value,
        in_space,
        frame,
    };
    let (n, t) = (frame.n, frame.tau);
    match patch.kind {
        PatchKind::Velocity => {
            let v = d.velocity.as_ref().map_or([0.0, 0.0], |v| v.eval(x));
            vec![r(n, dot(v, n), true), r(t, dot(v, t), true)]
        }
        PatchKind::Pressure | PatchKind::PressureNormalDerivative => vec![r(t, 0.0, true)],
        PatchKind::Vorticity => vec![r(n, 0.0, true)],
        PatchKind::NormalStress => vec![r(t, h(), true)],
        PatchKind::RobinSlip => vec![r(n, h(), true)],
        PatchKind::Traction => vec![],
        PatchKind::TrescaSlip => vec![r(n, h(), true), r(t, 0.0, false)],
        PatchKind::Leak => vec![r(t, h(), true), r(n, 0.0, false)],
        PatchKind::OutflowLeak | PatchKind::InflowLeak => {
            vec![r(t, 0.0, true), r(n, 0.0, false)]
        }
    }
}

/// Solves `dir_k · x = value_k` for a rank-2 request set, checking
/// consistency of every request.
fn solve_full(reqs: &[&Request], node: usize) -> Result<[f64; 2]> {
    let mut best = (0.0, 0, 0);
    for i in 0..reqs.len() {
        for j in i + 1..reqs.len() {
            let c = cross(reqs[i].dir, reqs[j].dir).abs();
            if c > best.0 {
                best = (c, i, j);
            }
        }
    }
    let (_, i, j) = best;
    let (a, b) = (reqs[i], reqs[j]);
    let det = cross(a.dir, b.dir);
    debug_assert!(det.abs() > 0.0);
    let x = [
        (a.value * b.dir[1] - b.value * a.dir[1]) / det,
        (a.dir[0] * b.value - b.dir[0] * a.value) / det,
    ];
    let scale = reqs.iter().map(|r| r.value.abs()).fold(1.0, f64::max);
    for r in reqs {
        let mismatch = (dot(r.dir, x) - r.value).abs();
        if mismatch > VALUE_TOL * scale {
            return Err(Error::IncompatibleFrames {
                node,
                message: format!(
                    "boundary data disagree by {mismatch:e} along direction ({:.6}, {:.6})",
                    r.dir[0], r.dir[1]
                ),
            });
        }
    }
    Ok(x)
}

fn span_rank(reqs: &[&Request]) -> usize {
    match reqs.first() {
        None => 0,
        Some(r0) => {
            if reqs.iter().any(|r| cross(r0.dir, r.dir).abs() > PARALLEL_TOL) {
                2
            } else {
                1
            }
        }
    }
}

pub fn build_dofmap(mesh: &Mesh, geom: &BoundaryGeometry, patches: &[BoundaryPatch]) -> Result<DofMap> {
    let table = patch_table(mesh, patches)?;
    let nodes = P2Nodes::new(mesh);
    let nn = nodes.len();
    let edges = mesh.boundary_edges();
    let edge_kinds: Vec<PatchKind> = edges.iter().map(|e| table[&e.tag].kind).collect();

    // (edge, local end) pairs touching each boundary P2 node; end 2 = midpoint
    let mut touching: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nn];
    for (k, e) in edges.iter().enumerate() {
        touching[e.nodes[0]].push((k, 0));
        touching[e.nodes[1]].push((k, 1));
        touching[nodes.boundary_midpoints[k]].push((k, 2));
    }
    let node_frame = |k: usize, end: usize| {
        let g = geom.edge(k);
        if end == 2 {
            g.frame
        } else {
            g.end_frames[end]
        }
    };

    let mut frames = vec![None; nn];
    let mut fixed = vec![false; 2 * nn];
    let mut lifting_fixed = vec![false; 2 * nn];
    let mut lifting_values = vec![0.0; 2 * nn];
    for q in 0..nn {
        if touching[q].is_empty() {
            continue;
        }
        let x = nodes.coords[q];
        let reqs: Vec<Request> = touching[q]
            .iter()
            .flat_map(|&(k, end)| requests_for(table[&edges[k].tag], node_frame(k, end), x))
            .collect();
        let space: Vec<&Request> = reqs.iter().filter(|r| r.in_space).collect();
        match span_rank(&space) {
            0 => {}
            2 => {
                let v = solve_full(&space, q)?;
                frames[q] = None;
                for c in 0..2 {
                    fixed[2 * q + c] = true;
                    lifting_fixed[2 * q + c] = true;
                    lifting_values[2 * q + c] = v[c];
                }
            }
            _ => {
                let lead = space[0];
                let frame = lead.frame;
                let axis = if dot(lead.dir, frame.n).abs() > 0.5 { 0 } else { 1 };
                let axis_dir = if axis == 0 { frame.n } else { frame.tau };
                let value = lead.value * dot(lead.dir, axis_dir);
                for r in &space {
                    let v = r.value * dot(r.dir, axis_dir);
                    if (v - value).abs() > VALUE_TOL * value.abs().max(1.0) {
                        return Err(Error::IncompatibleFrames {
                            node: q,
                            message: format!("adjacent patches prescribe {value} and {v}"),
                        });
                    }
                }
                frames[q] = Some(frame);
                fixed[2 * q + axis] = true;
                lifting_fixed[2 * q + axis] = true;
                lifting_values[2 * q + axis] = value;
                // lifting-only data in the complementary direction
                let extra: Vec<&Request> = reqs
                    .iter()
                    .filter(|r| !r.in_space && cross(r.dir, axis_dir).abs() > PARALLEL_TOL)
                    .collect();
                if !extra.is_empty() {
                    let mut all = space.clone();
                    all.extend(extra);
                    let v = solve_full(&all, q)?;
                    let local = frame.to_local(v);
                    lifting_fixed[2 * q + 1 - axis] = true;
                    lifting_values[2 * q + 1 - axis] = local[1 - axis];
                }
            }
        }
    }

    let mut friction = Vec::new();
    for (k, e) in edges.iter().enumerate() {
        let kind = edge_kinds[k];
        if !kind.is_friction() {
            continue;
        }
        let g = table[&e.tag].threshold();
        let len = geom.edge(k).length;
        let ends = [
            (e.nodes[0], 0usize, SIMPSON[0]),
            (e.nodes[1], 1, SIMPSON[1]),
            (nodes.boundary_midpoints[k], 2, SIMPSON[2]),
        ];
        for (q, end, w) in ends {
            let Some(frame) = frames[q] else {
                // fully fixed node: the trace vanishes
                continue;
            };
            let ef = node_frame(k, end);
            let dir = if kind == PatchKind::TrescaSlip { ef.tau } else { ef.n };
            let (dn, dt) = (dot(dir, frame.n), dot(dir, frame.tau));
            let axis = if fixed[2 * q] { 1 } else { 0 };
            let along = if axis == 0 { dn } else { dt };
            if along.abs() < 1.0 - 1e-6 {
                return Err(Error::IncompatibleFrames {
                    node: q,
                    message: format!("friction trace of kind {kind} is not a frame axis"),
                });
            }
            friction.push(FrictionTerm {
                dof: 2 * q + axis,
                sign: along.signum(),
                weight: w * len,
                g: g.eval(nodes.coords[q]),
                kind,
                edge: k,
                node: q,
            });
        }
    }

    let free: Vec<usize> = (0..2 * nn).filter(|&i| !fixed[i]).collect();
    let mut free_slot = vec![None; 2 * nn];
    for (s, &i) in free.iter().enumerate() {
        free_slot[i] = Some(s);
    }
    Ok(DofMap {
        nodes,
        frames,
        fixed,
        lifting_fixed,
        lifting_values,
        friction,
        edge_kinds,
        n_pressure: mesh.nodes().len(),
        free,
        free_slot,
    })
}

impl DofMap {
    pub fn n_velocity(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Position of a velocity dof among the free dofs.
    pub fn free_slot(&self, dof: usize) -> Option<usize> {
        self.free_slot[dof]
    }

    pub fn is_rotated(&self, node: usize) -> bool {
        self.frames[node].is_some()
    }

    /// Block-diagonal map from local to Cartesian components.
    pub fn rotation(&self) -> CsrMatrix {
        let n = self.n_velocity();
        let mut t = Triplets::with_capacity(n, n, 2 * n);
        for (q, f) in self.frames.iter().enumerate() {
            match f {
                None => {
                    t.push(2 * q, 2 * q, 1.0);
                    t.push(2 * q + 1, 2 * q + 1, 1.0);
                }
                Some(f) => {
                    t.push(2 * q, 2 * q, f.n[0]);
                    t.push(2 * q + 1, 2 * q, f.n[1]);
                    t.push(2 * q, 2 * q + 1, f.tau[0]);
                    t.push(2 * q + 1, 2 * q + 1, f.tau[1]);
                }
            }
        }
        t.to_csr()
    }

    pub fn to_cartesian(&self, local: &[f64]) -> Vec<f64> {
        let mut out = local.to_vec();
        for (q, f) in self.frames.iter().enumerate() {
            if let Some(f) = f {
                let v = f.to_cartesian([local[2 * q], local[2 * q + 1]]);
                out[2 * q] = v[0];
                out[2 * q + 1] = v[1];
            }
        }
        out
    }

    pub fn to_local(&self, cart: &[f64]) -> Vec<f64> {
        let mut out = cart.to_vec();
        for (q, f) in self.frames.iter().enumerate() {
            if let Some(f) = f {
                let v = f.to_local([cart[2 * q], cart[2 * q + 1]]);
                out[2 * q] = v[0];
                out[2 * q + 1] = v[1];
            }
        }
        out
    }

    /// Full local vector from free-dof values (fixed dofs zero).
    pub fn expand(&self, free_vals: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_velocity()];
        for (s, &i) in self.free.iter().enumerate() {
            out[i] = free_vals[s];
        }
        out
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }

    /// Cartesian velocity of P2 node `q` from a full local vector.
    pub fn node_velocity(&self, full_local: &[f64], q: usize) -> [f64; 2] {
        let l = [full_local[2 * q], full_local[2 * q + 1]];
        match &self.frames[q] {
            Some(f) => f.to_cartesian(l),
            None => l,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{compute_boundary_frames, structured_disk, unit_square, RectSide, ScalarField, VectorField};

    fn build(mesh: &Mesh, patches: &[BoundaryPatch]) -> Result<DofMap> {
        let g = compute_boundary_frames(mesh).unwrap();
        build_dofmap(mesh, &g, patches)
    }

    #[test]
    fn all_dirichlet_square_fixes_boundary() {
        let m = unit_square(3, 3, |_, _| 1).unwrap();
        let d = build(&m, &[BoundaryPatch::new(1, PatchKind::Velocity)]).unwrap();
        assert!(d.frames.iter().all(Option::is_none));
        // 4·3 boundary vertices + 12 boundary midpoints, two components each
        assert_eq!(d.fixed.iter().filter(|&&f| f).count(), 2 * 24);
        assert!(d.friction.is_empty());
    }

    #[test]
    fn tresca_bottom_fixes_normal_only() {
        let m = unit_square(4, 2, |s, _| if s == RectSide::Bottom { 8 } else { 1 }).unwrap();
        let patches = [
            BoundaryPatch::new(1, PatchKind::Velocity),
            BoundaryPatch::new(8, PatchKind::TrescaSlip)
                .with_h(ScalarField::constant(0.0))
                .with_threshold(ScalarField::constant(2.0)),
        ];
        let d = build(&m, &patches).unwrap();
        for (q, x) in d.nodes.coords.iter().enumerate() {
            let bottom_inner = x[1] == 0.0 && x[0] > 0.0 && x[0] < 1.0;
            if bottom_inner {
                let f = d.frames[q].unwrap();
                assert!((f.n[1] + 1.0).abs() < 1e-15);
                assert!(d.fixed[2 * q] && !d.fixed[2 * q + 1]);
                // lifting: both components fixed to zero
                assert!(d.lifting_fixed[2 * q] && d.lifting_fixed[2 * q + 1]);
            }
        }
        // 3 interior vertices and 4 midpoints carry friction; weights sum to the
        // length of the bottom edge minus the two corner vertex contributions
        let total: f64 = d.friction.iter().map(|t| t.weight).sum();
        assert!((total - (1.0 - 2.0 * 0.25 / 6.0)).abs() < 1e-14);
        assert!(d.friction.iter().all(|t| t.g == 2.0 && t.dof % 2 == 1));
    }

    #[test]
    fn disk_vorticity_patch_fixes_normals() {
        let m = structured_disk(2, 6, 1.0, |_| 3).unwrap();
        let d = build(&m, &[BoundaryPatch::new(3, PatchKind::Vorticity)]).unwrap();
        let mut count = 0;
        for (q, f) in d.frames.iter().enumerate() {
            if let Some(f) = f {
                count += 1;
                assert!(d.fixed[2 * q] && !d.fixed[2 * q + 1]);
                let x = d.nodes.coords[q];
                assert!(dot(f.n, x) > 0.0);
            }
        }
        assert_eq!(count, 24);
    }

    #[test]
    fn incompatible_corner_data_reports_node() {
        // inflow h = (0, 1) on the left meets a wall with zero normal velocity
        let m = unit_square(2, 2, |s, _| match s {
            RectSide::Left => 1,
            RectSide::Bottom => 8,
            _ => 6,
        })
        .unwrap();
        let patches = [
            BoundaryPatch::new(1, PatchKind::Velocity).with_velocity(VectorField::constant([0.0, 1.0])),
            BoundaryPatch::new(8, PatchKind::TrescaSlip).with_threshold(ScalarField::constant(1.0)),
            BoundaryPatch::new(6, PatchKind::Traction),
        ];
        match build(&m, &patches) {
            Err(Error::IncompatibleFrames { node, .. }) => assert_eq!(node, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rotation_is_orthogonal() {
        let m = structured_disk(2, 6, 1.0, |_| 8).unwrap();
        let d = build(
            &m,
            &[BoundaryPatch::new(8, PatchKind::TrescaSlip).with_threshold(ScalarField::constant(1.0))],
        )
        .unwrap();
        let t = d.rotation();
        let tt = t.transpose().matmul(&t);
        let dense = tt.to_dense();
        let id = nalgebra::DMatrix::<f64>::identity(dense.nrows(), dense.ncols());
        assert!((dense - id).abs().max() < 1e-14);
        let v: Vec<f64> = (0..d.n_velocity()).map(|i| (i as f64).sin()).collect();
        let back = d.to_local(&d.to_cartesian(&v));
        assert!(v.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-14));
    }
}
