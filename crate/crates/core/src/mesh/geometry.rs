//! Outward frames, turning-angle curvature and arc weights on the boundary.

use super::{Mesh, Point};
use crate::error::{Error, Result};

/// Orthonormal boundary frame; `tau` is `n` rotated by +90°.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub n: [f64; 2],
    pub tau: [f64; 2],
}

impl Frame {
    pub fn from_normal(n: [f64; 2]) -> Self {
        let len = n[0].hypot(n[1]);
        let n = [n[0] / len, n[1] / len];
        Self { n, tau: [-n[1], n[0]] }
    }

    /// Cartesian vector to (normal, tangential) components.
    pub fn to_local(&self, v: [f64; 2]) -> [f64; 2] {
        [
            v[0] * self.n[0] + v[1] * self.n[1],
            v[0] * self.tau[0] + v[1] * self.tau[1],
        ]
    }

    pub fn to_cartesian(&self, local: [f64; 2]) -> [f64; 2] {
        [
            local[0] * self.n[0] + local[1] * self.tau[0],
            local[0] * self.n[1] + local[1] * self.tau[1],
        ]
    }

    pub fn rotated(&self, c: f64, s: f64) -> Self {
        let r = |v: [f64; 2]| [c * v[0] - s * v[1], s * v[0] + c * v[1]];
        Self {
            n: r(self.n),
            tau: r(self.tau),
        }
    }
}

/// Geometry at a boundary vertex.
#[derive(Clone, Copy, Debug)]
pub struct NodeGeometry {
    pub node: usize,
    /// Bisector of the two adjacent edge normals.
    pub frame: Frame,
    /// Signed exterior angle, positive where the domain is locally convex.
    pub turning_angle: f64,
    /// Half the sum of the adjacent edge lengths.
    pub arc_weight: f64,
    pub kappa: f64,
    /// Incoming and outgoing boundary edge (traversal order).
    pub edges: [usize; 2],
    /// The two adjacent edges carry different tags.
    pub patch_corner: bool,
}

/// Geometry of a boundary edge. End attributes follow the edge's own patch:
/// at a patch corner the end frame is the edge frame and the end curvature
/// is zero, so data never crosses tags.
#[derive(Clone, Copy, Debug)]
pub struct EdgeGeometry {
    pub length: f64,
    pub frame: Frame,
    pub end_frames: [Frame; 2],
    pub end_kappa: [f64; 2],
    /// Edge-constant curvature used by boundary forms.
    pub kappa: f64,
}

#[derive(Clone, Debug)]
pub struct BoundaryGeometry {
    nodes: Vec<NodeGeometry>,
    node_slot: Vec<Option<usize>>,
    edges: Vec<EdgeGeometry>,
    loops: Vec<Vec<usize>>,
}

pub fn compute_boundary_frames(mesh: &Mesh) -> Result<BoundaryGeometry> {
    let pts = mesh.nodes();
    let bedges = mesh.boundary_edges();
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); pts.len()];
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); pts.len()];
    for (k, e) in bedges.iter().enumerate() {
        outgoing[e.nodes[0]].push(k);
        incoming[e.nodes[1]].push(k);
    }
    let mut base = Vec::with_capacity(bedges.len());
    for e in bedges {
        let (a, b) = (pts[e.nodes[0]], pts[e.nodes[1]]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let len = d[0].hypot(d[1]);
        if len <= 0.0 {
            return Err(Error::InvalidMesh("zero-length boundary edge".into()));
        }
        // domain on the left, so the outward normal is the direction rotated by -90°
        base.push((len, Frame::from_normal([d[1], -d[0]])));
    }

    let mut nodes = Vec::new();
    let mut node_slot = vec![None; pts.len()];
    for v in 0..pts.len() {
        let (ins, outs) = (&incoming[v], &outgoing[v]);
        if ins.is_empty() && outs.is_empty() {
            continue;
        }
        if ins.len() != 1 || outs.len() != 1 {
            return Err(Error::NonManifoldBoundary {
                node: v,
                count: ins.len() + outs.len(),
            });
        }
        let (ei, eo) = (ins[0], outs[0]);
        let (li, fi) = base[ei];
        let (lo, fo) = base[eo];
        let (di, do_) = (fi.tau, fo.tau);
        let turning = (di[0] * do_[1] - di[1] * do_[0]).atan2(di[0] * do_[0] + di[1] * do_[1]);
        let bis = [fi.n[0] + fo.n[0], fi.n[1] + fo.n[1]];
        let frame = if bis[0].hypot(bis[1]) < 1e-12 {
            // cusp: fall back to the outgoing edge
            fo
        } else {
            Frame::from_normal(bis)
        };
        let arc_weight = 0.5 * (li + lo);
        node_slot[v] = Some(nodes.len());
        nodes.push(NodeGeometry {
            node: v,
            frame,
            turning_angle: turning,
            arc_weight,
            kappa: turning / arc_weight,
            edges: [ei, eo],
            patch_corner: bedges[ei].tag != bedges[eo].tag,
        });
    }

    let edges = bedges
        .iter()
        .zip(&base)
        .map(|(e, &(length, frame))| {
            let end = |v: usize| {
                let g = &nodes[node_slot[v].expect("boundary node")];
                if g.patch_corner {
                    (frame, 0.0)
                } else {
                    (g.frame, g.kappa)
                }
            };
            let (f0, k0) = end(e.nodes[0]);
            let (f1, k1) = end(e.nodes[1]);
            EdgeGeometry {
                length,
                frame,
                end_frames: [f0, f1],
                end_kappa: [k0, k1],
                kappa: 0.5 * (k0 + k1),
            }
        })
        .collect();

    Ok(BoundaryGeometry {
        nodes,
        node_slot,
        edges,
        loops: mesh.boundary_loops().to_vec(),
    })
}

impl BoundaryGeometry {
    pub fn node(&self, mesh_node: usize) -> Option<&NodeGeometry> {
        self.node_slot.get(mesh_node).copied().flatten().map(|s| &self.nodes[s])
    }

    pub fn nodes(&self) -> &[NodeGeometry] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeGeometry] {
        &self.edges
    }

    pub fn edge(&self, k: usize) -> &EdgeGeometry {
        &self.edges[k]
    }

    /// Σ κ·arc-weight around boundary loop `l` (total turning, ±2π).
    pub fn loop_total_curvature(&self, mesh: &Mesh, l: usize) -> f64 {
        self.loops[l]
            .iter()
            .map(|&k| {
                let v = mesh.boundary_edges()[k].nodes[0];
                let g = self.node(v).expect("boundary node");
                g.kappa * g.arc_weight
            })
            .sum()
    }

    /// Smallest end curvature over edges carrying `tag`.
    pub fn min_kappa_on(&self, mesh: &Mesh, tag: u8) -> Option<f64> {
        mesh.boundary_edges()
            .iter()
            .zip(&self.edges)
            .filter(|(e, _)| e.tag == tag)
            .map(|(_, g)| g.end_kappa[0].min(g.end_kappa[1]))
            .reduce(f64::min)
    }
}

/// Boundary identities checked by [`identity_residual`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Identity {
    /// `(ε(v)n, τ) = ½(∂v/∂n, τ) − ½κ v·τ` for fields with `v·n = 0`.
    ShearTraction,
    /// `(ε(v)n, n) = −κ v·n − div_Γ v_τ + div v` for fields with `v·τ = 0`.
    NormalTraction,
}

/// A vector field with its exact Jacobian, `grad[i][j] = ∂v_i/∂x_j`.
pub type PointField<'a> = dyn Fn(Point) -> ([f64; 2], [[f64; 2]; 2]) + 'a;

/// Maximum residual of the chosen identity at the vertices and edge
/// midpoints of patch `tag`, evaluated with the discrete frames and
/// curvature.
pub fn identity_residual(
    mesh: &Mesh,
    geom: &BoundaryGeometry,
    field: &PointField<'_>,
    tag: u8,
    which: Identity,
) -> Result<f64> {
    let pts = mesh.nodes();
    let mut samples: Vec<(Point, Frame, f64)> = Vec::new();
    for (e, g) in mesh.boundary_edges().iter().zip(geom.edges()) {
        if e.tag != tag {
            continue;
        }
        let (a, b) = (pts[e.nodes[0]], pts[e.nodes[1]]);
        samples.push((a, g.end_frames[0], g.end_kappa[0]));
        samples.push(([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])], g.frame, g.kappa));
        samples.push((b, g.end_frames[1], g.end_kappa[1]));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument(format!("patch {tag} has no boundary edges")));
    }
    let mut worst = 0.0f64;
    for (x, f, kappa) in samples {
        let (v, grad) = field(x);
        let [vn, vt] = f.to_local(v);
        let eps = |a: usize, b: usize| 0.5 * (grad[a][b] + grad[b][a]);
        let quad = |p: [f64; 2], q: [f64; 2]| {
            (0..2)
                .flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| p[i] * eps(i, j) * q[j])
                .sum::<f64>()
        };
        let dn = [
            grad[0][0] * f.n[0] + grad[0][1] * f.n[1],
            grad[1][0] * f.n[0] + grad[1][1] * f.n[1],
        ];
        let r = match which {
            Identity::ShearTraction => {
                if vn.abs() > 1e-10 {
                    return Err(Error::Precondition(format!(
                        "normal trace {vn:e} at ({}, {}) is not zero",
                        x[0], x[1]
                    )));
                }
                let lhs = quad(f.tau, f.n);
                let rhs = 0.5 * (dn[0] * f.tau[0] + dn[1] * f.tau[1]) - 0.5 * kappa * vt;
                lhs - rhs
            }
            Identity::NormalTraction => {
                if vt.abs() > 1e-10 {
                    return Err(Error::Precondition(format!(
                        "tangential trace {vt:e} at ({}, {}) is not zero",
                        x[0], x[1]
                    )));
                }
                // v_τ vanishes on the patch, so its surface divergence does too
                let lhs = quad(f.n, f.n);
                let rhs = -kappa * vn + grad[0][0] + grad[1][1];
                lhs - rhs
            }
        };
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Closed-form turning-angle curvature of a regular `n`-gon.
#[cfg(test)]
fn regular_polygon_kappa(n: usize, radius: f64) -> f64 {
    let theta = 2.0 * std::f64::consts::PI / n as f64;
    theta / (2.0 * radius * (theta / 2.0).sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{structured_disk, unit_square};
    use std::f64::consts::PI;

    #[test]
    fn square_edge_interior_is_flat_and_corners_bisect() {
        let m = unit_square(4, 4, |_, _| 1).unwrap();
        let g = compute_boundary_frames(&m).unwrap();
        for ng in g.nodes() {
            let p = m.nodes()[ng.node];
            let corner = (p[0] == 0.0 || p[0] == 1.0) && (p[1] == 0.0 || p[1] == 1.0);
            if corner {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let want = [if p[0] == 0.0 { -s } else { s }, if p[1] == 0.0 { -s } else { s }];
                assert!((ng.frame.n[0] - want[0]).abs() < 1e-15);
                assert!((ng.frame.n[1] - want[1]).abs() < 1e-15);
                assert!(ng.kappa > 0.0);
            } else {
                assert_eq!(ng.kappa, 0.0);
            }
            let f = ng.frame;
            assert!((f.n[0].hypot(f.n[1]) - 1.0).abs() < 1e-12);
            assert!((f.n[0] * f.tau[0] + f.n[1] * f.tau[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn polygon_curvature_near_one() {
        let m = structured_disk(8, 32, 1.0, |_| 3).unwrap();
        let g = compute_boundary_frames(&m).unwrap();
        assert_eq!(g.nodes().len(), 256);
        let closed = regular_polygon_kappa(256, 1.0);
        for ng in g.nodes() {
            assert!((0.99..=1.01).contains(&ng.kappa));
            assert!((ng.kappa - closed).abs() < 1e-12);
            let p = m.nodes()[ng.node];
            assert!(p[0] * ng.frame.n[0] + p[1] * ng.frame.n[1] > 0.0);
        }
        assert!((g.loop_total_curvature(&m, 0) - 2.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn patch_corners_use_edge_frames() {
        let m = unit_square(2, 2, |s, _| if s == crate::mesh::RectSide::Bottom { 8 } else { 1 }).unwrap();
        let g = compute_boundary_frames(&m).unwrap();
        for (e, eg) in m.boundary_edges().iter().zip(g.edges()) {
            if e.tag == 8 {
                for f in eg.end_frames {
                    assert!((f.n[1] + 1.0).abs() < 1e-15);
                }
                assert_eq!(eg.kappa, 0.0);
            }
        }
    }

    #[test]
    fn zero_field_has_zero_residual() {
        let m = structured_disk(2, 8, 1.0, |_| 2).unwrap();
        let g = compute_boundary_frames(&m).unwrap();
        let zero = |_: Point| ([0.0, 0.0], [[0.0; 2]; 2]);
        for which in [Identity::ShearTraction, Identity::NormalTraction] {
            assert_eq!(identity_residual(&m, &g, &zero, 2, which).unwrap(), 0.0);
        }
    }

    #[test]
    fn precondition_is_enforced() {
        let m = structured_disk(2, 8, 1.0, |_| 2).unwrap();
        let g = compute_boundary_frames(&m).unwrap();
        let radial = |p: Point| (p, [[1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(
            identity_residual(&m, &g, &radial, 2, Identity::ShearTraction),
            Err(Error::Precondition(_))
        ));
    }
}
