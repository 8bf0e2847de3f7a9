//! Element and boundary integrals in Cartesian velocity components.
//!
//! All matrices here act on the full P2 velocity vector with dof
//! `2·node + c`, `c` the Cartesian component; rows are test functions.
//! Rotation to boundary frames and restriction to free dofs happen in
//! [`crate::problem`].

use std::collections::HashMap;

use crate::fem::{edge_rule, p2_edge_values, triangle_rule, Element, P2Nodes};
use crate::linalg::{CsrMatrix, Triplets};
use crate::mesh::{BoundaryGeometry, BoundaryPatch, Mesh, PatchKind, Point};

/// Which argument of a trilinear convection form carries the coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    /// `u ↦ a(W, u, ·)`: the coefficient transports the unknown.
    First,
    /// `u ↦ a(u, W, ·)`: the unknown transports the coefficient.
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvectionForm {
    /// `⟨(w·∇)u, v⟩`
    Advective,
    /// `⟨rot w × u, v⟩` with `rot w × u = ω(w)(−u_y, u_x)`
    Rotational,
}

/// Value and Jacobian (`grad[i][j] = ∂v_i/∂x_j`) of a vector field.
pub type Jet = ([f64; 2], [[f64; 2]; 2]);

/// Triangle-level data shared by every assembly routine.
#[derive(Clone, Debug)]
pub struct FeSpace {
    pub nodes: P2Nodes,
    pub elements: Vec<Element>,
    pub vertex_tris: Vec<[usize; 3]>,
    n_vertices: usize,
    qvals: Vec<[f64; 6]>,
}

struct Qp {
    weight: f64,
    point: Point,
    lambda: [f64; 3],
    vals: [f64; 6],
    grads: [[f64; 2]; 6],
}

impl FeSpace {
    pub fn new(mesh: &Mesh, nodes: P2Nodes) -> Self {
        let pts = mesh.nodes();
        let elements = mesh
            .triangles()
            .iter()
            .map(|t| Element::new([pts[t[0]], pts[t[1]], pts[t[2]]]))
            .collect();
        let qvals = triangle_rule().iter().map(|(l, _)| Element::p2_values(*l)).collect();
        Self {
            nodes,
            elements,
            vertex_tris: mesh.triangles().to_vec(),
            n_vertices: pts.len(),
            qvals,
        }
    }

    pub fn n_velocity(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn n_pressure(&self) -> usize {
        self.n_vertices
    }

    fn qps(&self, t: usize) -> impl Iterator<Item = Qp> + '_ {
        let e = &self.elements[t];
        triangle_rule().iter().zip(&self.qvals).map(move |((l, w), vals)| Qp {
            weight: w * e.area,
            point: e.point(*l),
            lambda: *l,
            vals: *vals,
            grads: e.p2_grads(*l),
        })
    }

    fn local_dofs(&self, t: usize) -> [usize; 12] {
        let n = &self.nodes.triangles[t];
        std::array::from_fn(|k| 2 * n[k / 2] + k % 2)
    }

    fn scatter(&self, trip: &mut Triplets, t: usize, ke: &[[f64; 12]; 12]) {
        let d = self.local_dofs(t);
        for r in 0..12 {
            for c in 0..12 {
                if ke[r][c] != 0.0 {
                    trip.push(d[r], d[c], ke[r][c]);
                }
            }
        }
    }

    fn assemble(&self, mut element: impl FnMut(usize, &mut [[f64; 12]; 12])) -> CsrMatrix {
        let n = self.n_velocity();
        let mut trip = Triplets::with_capacity(n, n, 144 * self.elements.len());
        for t in 0..self.elements.len() {
            let mut ke = [[0.0; 12]; 12];
            element(t, &mut ke);
            self.scatter(&mut trip, t, &ke);
        }
        trip.to_csr()
    }

    /// Field value and Jacobian at a quadrature point from Cartesian
    /// coefficients.
    fn jet(&self, t: usize, q: &Qp, coeffs: &[f64]) -> Jet {
        let n = &self.nodes.triangles[t];
        let mut v = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for k in 0..6 {
            for c in 0..2 {
                let x = coeffs[2 * n[k] + c];
                v[c] += x * q.vals[k];
                g[c][0] += x * q.grads[k][0];
                g[c][1] += x * q.grads[k][1];
            }
        }
        (v, g)
    }

    /// Evaluates a Cartesian P2 field at barycentric point `l` of triangle `t`.
    pub fn eval(&self, t: usize, l: [f64; 3], coeffs: &[f64]) -> Jet {
        let e = &self.elements[t];
        let q = Qp {
            weight: 0.0,
            point: e.point(l),
            lambda: l,
            vals: Element::p2_values(l),
            grads: e.p2_grads(l),
        };
        self.jet(t, &q, coeffs)
    }

    /// `2ν(ε(w), ε(u))`.
    pub fn strain_matrix(&self, nu: f64) -> CsrMatrix {
        self.assemble(|t, ke| {
            for q in self.qps(t) {
                let g = &q.grads;
                for i in 0..6 {
                    for j in 0..6 {
                        let gg = g[i][0] * g[j][0] + g[i][1] * g[j][1];
                        for a in 0..2 {
                            for b in 0..2 {
                                let diag = if a == b { gg } else { 0.0 };
                                ke[2 * i + a][2 * j + b] += nu * q.weight * (diag + g[i][b] * g[j][a]);
                            }
                        }
                    }
                }
            }
        })
    }

    /// Full H¹ inner product `(∇w, ∇u) + (w, u)`.
    pub fn h1_matrix(&self) -> CsrMatrix {
        self.assemble(|t, ke| {
            for q in self.qps(t) {
                for i in 0..6 {
                    for j in 0..6 {
                        let v = q.weight
                            * (q.grads[i][0] * q.grads[j][0] + q.grads[i][1] * q.grads[j][1] + q.vals[i] * q.vals[j]);
                        ke[2 * i][2 * j] += v;
                        ke[2 * i + 1][2 * j + 1] += v;
                    }
                }
            }
        })
    }

    /// Vector L² inner product.
    pub fn mass_matrix(&self) -> CsrMatrix {
        self.assemble(|t, ke| {
            for q in self.qps(t) {
                for i in 0..6 {
                    for j in 0..6 {
                        let v = q.weight * q.vals[i] * q.vals[j];
                        ke[2 * i][2 * j] += v;
                        ke[2 * i + 1][2 * j + 1] += v;
                    }
                }
            }
        })
    }

    /// `B[k, (j, c)] = −∫ q_k ∂_c ψ_j` with P1 pressure basis `q_k`.
    pub fn divergence_matrix(&self) -> CsrMatrix {
        let mut trip = Triplets::with_capacity(self.n_vertices, self.n_velocity(), 36 * self.elements.len());
        for t in 0..self.elements.len() {
            let d = self.local_dofs(t);
            let vt = self.vertex_tris[t];
            let mut be = [[0.0; 12]; 3];
            for q in self.qps(t) {
                for k in 0..3 {
                    for j in 0..6 {
                        for c in 0..2 {
                            be[k][2 * j + c] -= q.weight * q.lambda[k] * q.grads[j][c];
                        }
                    }
                }
            }
            for k in 0..3 {
                for (r, &col) in d.iter().enumerate() {
                    trip.push(vt[k], col, be[k][r]);
                }
            }
        }
        trip.to_csr()
    }

    /// P1 pressure mass matrix.
    pub fn pressure_mass(&self) -> CsrMatrix {
        let n = self.n_vertices;
        let mut trip = Triplets::with_capacity(n, n, 9 * self.elements.len());
        for (t, e) in self.elements.iter().enumerate() {
            let vt = self.vertex_tris[t];
            for a in 0..3 {
                for b in 0..3 {
                    let m = if a == b { e.area / 6.0 } else { e.area / 12.0 };
                    trip.push(vt[a], vt[b], m);
                }
            }
        }
        trip.to_csr()
    }

    /// `∫ f·v` for every test function.
    pub fn body_load(&self, f: &dyn Fn(Point) -> [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_velocity()];
        for t in 0..self.elements.len() {
            let d = self.local_dofs(t);
            for q in self.qps(t) {
                let fv = f(q.point);
                for i in 0..6 {
                    out[d[2 * i]] += q.weight * fv[0] * q.vals[i];
                    out[d[2 * i + 1]] += q.weight * fv[1] * q.vals[i];
                }
            }
        }
        out
    }

    /// Matrix of one linearization of a convection form around the Cartesian
    /// coefficient vector `w`.
    pub fn convection_matrix(&self, form: ConvectionForm, slot: Slot, w: &[f64]) -> CsrMatrix {
        self.assemble(|t, ke| {
            for q in self.qps(t) {
                let (wv, wg) = self.jet(t, &q, w);
                let (phi, g) = (&q.vals, &q.grads);
                match (form, slot) {
                    (ConvectionForm::Advective, Slot::First) => {
                        // δ_ab φ_i (W·∇φ_j)
                        for i in 0..6 {
                            for j in 0..6 {
                                let v = q.weight * phi[i] * (wv[0] * g[j][0] + wv[1] * g[j][1]);
                                ke[2 * i][2 * j] += v;
                                ke[2 * i + 1][2 * j + 1] += v;
                            }
                        }
                    }
                    (ConvectionForm::Advective, Slot::Second) => {
                        // φ_i φ_j ∂_b W_a
                        for i in 0..6 {
                            for j in 0..6 {
                                let m = q.weight * phi[i] * phi[j];
                                for a in 0..2 {
                                    for b in 0..2 {
                                        ke[2 * i + a][2 * j + b] += m * wg[a][b];
                                    }
                                }
                            }
                        }
                    }
                    (ConvectionForm::Rotational, Slot::First) => {
                        // ω(W)(u_x v_y − u_y v_x)
                        let om = wg[1][0] - wg[0][1];
                        for i in 0..6 {
                            for j in 0..6 {
                                let m = q.weight * om * phi[i] * phi[j];
                                ke[2 * i + 1][2 * j] += m;
                                ke[2 * i][2 * j + 1] -= m;
                            }
                        }
                    }
                    (ConvectionForm::Rotational, Slot::Second) => {
                        // ω(u)(W_x v_y − W_y v_x)
                        for i in 0..6 {
                            for j in 0..6 {
                                let om = [-g[j][1], g[j][0]];
                                for b in 0..2 {
                                    let m = q.weight * om[b] * phi[i];
                                    ke[2 * i][2 * j + b] -= m * wv[1];
                                    ke[2 * i + 1][2 * j + b] += m * wv[0];
                                }
                            }
                        }
                    }
                }
            }
        })
    }

    /// Gradient of `w ↦ a(w, u, v)` (Cartesian coefficients).
    pub fn convection_grad_first(&self, form: ConvectionForm, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_velocity()];
        for t in 0..self.elements.len() {
            let d = self.local_dofs(t);
            for q in self.qps(t) {
                let (uv, ug) = self.jet(t, &q, u);
                let (vv, _) = self.jet(t, &q, v);
                match form {
                    ConvectionForm::Advective => {
                        // w = φ_j e_b: ∫ φ_j (∂_b u)·v
                        for j in 0..6 {
                            for b in 0..2 {
                                let s = ug[0][b] * vv[0] + ug[1][b] * vv[1];
                                out[d[2 * j + b]] += q.weight * q.vals[j] * s;
                            }
                        }
                    }
                    ConvectionForm::Rotational => {
                        let cross = uv[0] * vv[1] - uv[1] * vv[0];
                        for j in 0..6 {
                            let g = q.grads[j];
                            out[d[2 * j]] -= q.weight * g[1] * cross;
                            out[d[2 * j + 1]] += q.weight * g[0] * cross;
                        }
                    }
                }
            }
        }
        out
    }

    /// `∫ |u|⁴` and its gradient with respect to the Cartesian coefficients.
    pub fn l4_power(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let mut total = 0.0;
        let mut grad = vec![0.0; self.n_velocity()];
        for t in 0..self.elements.len() {
            let d = self.local_dofs(t);
            for q in self.qps(t) {
                let (uv, _) = self.jet(t, &q, u);
                let s = uv[0] * uv[0] + uv[1] * uv[1];
                total += q.weight * s * s;
                for j in 0..6 {
                    for c in 0..2 {
                        grad[d[2 * j + c]] += 4.0 * q.weight * s * uv[c] * q.vals[j];
                    }
                }
            }
        }
        (total, grad)
    }

    /// `(‖u − u_h‖_{L²}, |u − u_h|_{H¹})` against an exact field.
    pub fn velocity_errors(&self, u: &[f64], exact: &dyn Fn(Point) -> Jet) -> (f64, f64) {
        let (mut l2, mut h1) = (0.0, 0.0);
        for t in 0..self.elements.len() {
            for q in self.qps(t) {
                let (v, g) = self.jet(t, &q, u);
                let (ve, ge) = exact(q.point);
                for c in 0..2 {
                    l2 += q.weight * (v[c] - ve[c]).powi(2);
                    for k in 0..2 {
                        h1 += q.weight * (g[c][k] - ge[c][k]).powi(2);
                    }
                }
            }
        }
        (l2.sqrt(), h1.sqrt())
    }

    /// L² pressure error after removing the mean difference.
    pub fn pressure_error(&self, p: &[f64], exact: &dyn Fn(Point) -> f64) -> f64 {
        let mut area = 0.0;
        let mut mean = 0.0;
        let mut samples = Vec::new();
        for (t, e) in self.elements.iter().enumerate() {
            let vt = self.vertex_tris[t];
            for (l, w) in triangle_rule() {
                let ph = l[0] * p[vt[0]] + l[1] * p[vt[1]] + l[2] * p[vt[2]];
                let diff = ph - exact(e.point(*l));
                let wa = w * e.area;
                area += wa;
                mean += wa * diff;
                samples.push((wa, diff));
            }
        }
        let mean = mean / area;
        samples.iter().map(|(w, d)| w * (d - mean).powi(2)).sum::<f64>().sqrt()
    }
}

/// Boundary P2 nodes of edge `k`: start, end, midpoint.
pub fn edge_nodes(mesh: &Mesh, nodes: &P2Nodes, k: usize) -> [usize; 3] {
    let e = &mesh.boundary_edges()[k];
    [e.nodes[0], e.nodes[1], nodes.boundary_midpoints[k]]
}

fn edge_points(mesh: &Mesh, k: usize) -> (Point, Point) {
    let e = &mesh.boundary_edges()[k];
    (mesh.nodes()[e.nodes[0]], mesh.nodes()[e.nodes[1]])
}

fn lerp(a: Point, b: Point, s: f64) -> Point {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

/// Boundary bilinear forms: `2ν(κw, u)` on kind 2, `2ν(κ w_τ, u_τ)` on
/// kind 3, `2(αw, u)` on kind 5 and `ν(κw, u)` on kind 7, with the
/// edge-constant curvature.
pub fn boundary_form_matrix(
    mesh: &Mesh,
    geom: &BoundaryGeometry,
    nodes: &P2Nodes,
    patches: &HashMap<u8, &BoundaryPatch>,
    nu: f64,
) -> CsrMatrix {
    let n = 2 * nodes.len();
    let mut trip = Triplets::new(n, n);
    for (k, e) in mesh.boundary_edges().iter().enumerate() {
        let patch = patches[&e.tag];
        let g = geom.edge(k);
        let (a, b) = edge_points(mesh, k);
        let ids = edge_nodes(mesh, nodes, k);
        let mut ke = [[0.0; 6]; 6];
        for (s, w) in edge_rule() {
            let phi = p2_edge_values(s);
            let x = lerp(a, b, s);
            // 2×2 coefficient matrix C with integrand (C w)·u
            let c: [[f64; 2]; 2] = match patch.kind {
                PatchKind::Pressure => [[2.0 * nu * g.kappa, 0.0], [0.0, 2.0 * nu * g.kappa]],
                PatchKind::PressureNormalDerivative => [[nu * g.kappa, 0.0], [0.0, nu * g.kappa]],
                PatchKind::Vorticity => {
                    let t = g.frame.tau;
                    let s = 2.0 * nu * g.kappa;
                    [[s * t[0] * t[0], s * t[0] * t[1]], [s * t[1] * t[0], s * t[1] * t[1]]]
                }
                PatchKind::RobinSlip => match &patch.data.alpha {
                    Some(al) => [
                        [2.0 * al[0].eval(x), 2.0 * al[1].eval(x)],
                        [2.0 * al[2].eval(x), 2.0 * al[3].eval(x)],
                    ],
                    None => continue,
                },
                _ => continue,
            };
            let wl = w * g.length;
            for i in 0..3 {
                for j in 0..3 {
                    let m = wl * phi[i] * phi[j];
                    for ca in 0..2 {
                        for cb in 0..2 {
                            ke[2 * i + ca][2 * j + cb] += m * c[ca][cb];
                        }
                    }
                }
            }
        }
        for r in 0..6 {
            for c in 0..6 {
                if ke[r][c] != 0.0 {
                    trip.push(2 * ids[r / 2] + r % 2, 2 * ids[c / 2] + c % 2, ke[r][c]);
                }
            }
        }
    }
    trip.to_csr()
}

/// `Σ_{2,4,7} ⟨φ, u_n⟩ + Σ_{3,5,6} ⟨φ, u⟩` with the edge normal.
pub fn boundary_phi_load(
    mesh: &Mesh,
    geom: &BoundaryGeometry,
    nodes: &P2Nodes,
    patches: &HashMap<u8, &BoundaryPatch>,
) -> Vec<f64> {
    let mut out = vec![0.0; 2 * nodes.len()];
    for (k, e) in mesh.boundary_edges().iter().enumerate() {
        let patch = patches[&e.tag];
        let g = geom.edge(k);
        let (a, b) = edge_points(mesh, k);
        let ids = edge_nodes(mesh, nodes, k);
        for (s, w) in edge_rule() {
            let x = lerp(a, b, s);
            let traction = match (&patch.data.phi_normal, &patch.data.phi) {
                (Some(p), _) => {
                    let v = p.eval(x);
                    [v * g.frame.n[0], v * g.frame.n[1]]
                }
                (None, Some(p)) => p.eval(x),
                (None, None) => continue,
            };
            let phi = p2_edge_values(s);
            for i in 0..3 {
                for c in 0..2 {
                    out[2 * ids[i] + c] += w * g.length * phi[i] * traction[c];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::mesh::unit_square;

    fn space(nx: usize) -> (Mesh, FeSpace) {
        let m = unit_square(nx, nx, |_, _| 1).unwrap();
        let n = P2Nodes::new(&m);
        let s = FeSpace::new(&m, n);
        (m, s)
    }

    fn interp(s: &FeSpace, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
        s.nodes.coords.iter().flat_map(|&p| f(p)).collect()
    }

    #[test]
    fn strain_form_exact_for_linear_fields() {
        let (_, s) = space(3);
        let nu = 0.7;
        let k = s.strain_matrix(nu);
        // w = (x + 2y, 3x − y): ε = [[1, 2.5], [2.5, −1]]
        // u = (y, −x + 4y):     ε = [[0, 0], [0, 4]]
        let w = interp(&s, |p| [p[0] + 2.0 * p[1], 3.0 * p[0] - p[1]]);
        let u = interp(&s, |p| [p[1], -p[0] + 4.0 * p[1]]);
        let val = k.bilinear(&u, &w);
        assert!((val - 2.0 * nu * (-4.0)).abs() < 1e-12, "{val}");
        // rigid motion has zero strain energy
        let r = interp(&s, |p| [1.0 - p[1], 2.0 + p[0]]);
        assert!(k.mul_vec(&r).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn single_triangle_constant_strain_entry() {
        let m = Mesh::from_parts(
            vec![[0.0, 0.0], [2.0, 0.0], [0.5, 1.5]],
            vec![[0, 1, 2]],
            vec![(0, 1, 1), (1, 2, 1), (2, 0, 1)],
        )
        .unwrap();
        let s = FeSpace::new(&m, P2Nodes::new(&m));
        let k = s.strain_matrix(1.3);
        let w = interp(&s, |p| [p[1], 0.0]);
        let u = interp(&s, |p| [p[1], p[0]]);
        // ε(w) = [[0, .5], [.5, 0]], ε(u) = [[0, 1], [1, 0]] → ε:ε = 1, area 1.5
        assert!((k.bilinear(&u, &w) - 2.0 * 1.3 * 1.0 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn body_load_row_sums_give_area() {
        let (_, s) = space(4);
        let f = s.body_load(&|_| [0.0, -1.0]);
        let (sx, sy) = f.chunks(2).fold((0.0, 0.0), |a, c| (a.0 + c[0], a.1 + c[1]));
        assert!(sx.abs() < 1e-14 && (sy + 1.0).abs() < 1e-13);
    }

    #[test]
    fn divergence_of_solenoidal_field_vanishes() {
        let (_, s) = space(3);
        let b = s.divergence_matrix();
        let u = interp(&s, |p| [p[0] * p[0], -2.0 * p[0] * p[1]]);
        assert!(b.mul_vec(&u).iter().all(|x| x.abs() < 1e-14));
        let one = vec![1.0; s.n_pressure()];
        let ones_b = b.tr_mul_vec(&one);
        // ∫ div ψ = boundary flux; radial field (x, y) has div 2 over area 1
        let r = interp(&s, |p| [p[0], p[1]]);
        assert!((dot(&ones_b, &r) + 2.0).abs() < 1e-13);
    }

    #[test]
    fn rotational_form_is_skew() {
        let (_, s) = space(3);
        let w = interp(&s, |p| [(3.0 * p[1]).sin(), p[0] * p[0]]);
        let n = s.convection_matrix(ConvectionForm::Rotational, Slot::First, &w);
        let u = interp(&s, |p| [p[0] * p[1], (p[0] - p[1]).cos()]);
        let val = n.bilinear(&u, &u);
        assert!(val.abs() < 1e-13 * n.max_abs() * dot(&u, &u));
    }

    #[test]
    fn rigid_rotation_vorticity_closed_form() {
        // U = (−y, x): rot U = 2, so ⟨rot U × w, u⟩ = 2 (w × u)_z · area
        let (_, s) = space(2);
        let uu = interp(&s, |p| [-p[1], p[0]]);
        let n = s.convection_matrix(ConvectionForm::Rotational, Slot::First, &uu);
        let w = interp(&s, |_| [1.0, 0.0]);
        let u = interp(&s, |_| [0.0, 1.0]);
        assert!((n.bilinear(&u, &w) - 2.0).abs() < 1e-13);
        // constant U has no vorticity
        let c = interp(&s, |_| [0.3, -0.2]);
        assert!(
            s.convection_matrix(ConvectionForm::Rotational, Slot::First, &c)
                .max_abs()
                < 1e-14
        );
    }

    #[test]
    fn linearizations_agree_with_trilinear_gradient() {
        let (_, s) = space(2);
        let w = interp(&s, |p| [p[1] * p[1], p[0] - p[1]]);
        let u = interp(&s, |p| [p[0], p[0] * p[1]]);
        let v = interp(&s, |p| [1.0 + p[1], -p[0]]);
        for form in [ConvectionForm::Advective, ConvectionForm::Rotational] {
            let a = s.convection_matrix(form, Slot::First, &w).bilinear(&v, &u);
            let b = s.convection_matrix(form, Slot::Second, &u).bilinear(&v, &w);
            let c = dot(&s.convection_grad_first(form, &u, &v), &w);
            assert!((a - b).abs() < 1e-13 && (a - c).abs() < 1e-13, "{form:?}: {a} {b} {c}");
        }
    }
}
