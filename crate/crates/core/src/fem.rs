//! Quadrature rules, P2/P1 Lagrange bases and the P2 node numbering.

use std::collections::HashMap;

use crate::mesh::{Mesh, Point};

/// Degree-5, seven-point rule on the reference triangle. Each point is given
/// in barycentric coordinates; weights sum to one (multiply by the area).
pub fn triangle_rule() -> &'static [([f64; 3], f64)] {
    use std::sync::OnceLock;
    static RULE: OnceLock<Vec<([f64; 3], f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let s15 = 15f64.sqrt();
        let mut r = vec![([1.0 / 3.0; 3], 9.0 / 40.0)];
        for (b, w) in [
            ((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0),
            ((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0),
        ] {
            let a = 1.0 - 2.0 * b;
            r.push(([a, b, b], w));
            r.push(([b, a, b], w));
            r.push(([b, b, a], w));
        }
        r
    })
}

/// Three-point Gauss rule on [0, 1]: (parameter, weight).
pub fn edge_rule() -> [(f64, f64); 3] {
    let d = 0.5 * (0.6f64).sqrt();
    [(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)]
}

/// P2 shape functions on an edge parametrized by `s ∈ [0, 1]`:
/// start vertex, end vertex, midpoint.
pub fn p2_edge_values(s: f64) -> [f64; 3] {
    [(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)]
}

/// Lumped (Simpson) edge weights for start, end and midpoint nodes,
/// as fractions of the edge length.
pub const SIMPSON: [f64; 3] = [1.0 / 6.0, 1.0 / 6.0, 4.0 / 6.0];

/// Affine triangle data.
#[derive(Clone, Copy, Debug)]
pub struct Element {
    pub verts: [Point; 3],
    pub area: f64,
    /// Constant gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
}

impl Element {
    pub fn new(verts: [Point; 3]) -> Self {
        let [p0, p1, p2] = verts;
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let g = |a: Point, b: Point| [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
        Self {
            verts,
            area: 0.5 * det,
            grad_lambda: [g(p1, p2), g(p2, p0), g(p0, p1)],
        }
    }

    pub fn point(&self, l: [f64; 3]) -> Point {
        let v = &self.verts;
        [
            l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
            l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
        ]
    }

    /// P2 values, local order v0, v1, v2, m01, m12, m20.
    pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
        [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ]
    }

    pub fn p2_grads(&self, l: [f64; 3]) -> [[f64; 2]; 6] {
        let g = &self.grad_lambda;
        let lin = |a: f64, ga: [f64; 2], b: f64, gb: [f64; 2]| [a * ga[0] + b * gb[0], a * ga[1] + b * gb[1]];
        [
            lin(4.0 * l[0] - 1.0, g[0], 0.0, g[0]),
            lin(4.0 * l[1] - 1.0, g[1], 0.0, g[1]),
            lin(4.0 * l[2] - 1.0, g[2], 0.0, g[2]),
            lin(4.0 * l[1], g[0], 4.0 * l[0], g[1]),
            lin(4.0 * l[2], g[1], 4.0 * l[1], g[2]),
            lin(4.0 * l[0], g[2], 4.0 * l[2], g[0]),
        ]
    }
}

/// P2 node numbering: mesh vertices first, then one node per edge.
#[derive(Clone, Debug)]
pub struct P2Nodes {
    pub n_vertices: usize,
    pub coords: Vec<Point>,
    /// Per triangle: v0, v1, v2, m01, m12, m20.
    pub triangles: Vec<[usize; 6]>,
    /// Midpoint node of each mesh boundary edge.
    pub boundary_midpoints: Vec<usize>,
}

impl P2Nodes {
    pub fn new(mesh: &Mesh) -> Self {
        let nv = mesh.nodes().len();
        let mut coords = mesh.nodes().to_vec();
        let mut edge_node: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, coords: &mut Vec<Point>| {
            let k = if a < b { (a, b) } else { (b, a) };
            *edge_node.entry(k).or_insert_with(|| {
                let (p, q) = (coords[a], coords[b]);
                coords.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                coords.len() - 1
            })
        };
        let triangles = mesh
            .triangles()
            .iter()
            .map(|t| {
                let m01 = mid(t[0], t[1], &mut coords);
                let m12 = mid(t[1], t[2], &mut coords);
                let m20 = mid(t[2], t[0], &mut coords);
                [t[0], t[1], t[2], m01, m12, m20]
            })
            .collect();
        let boundary_midpoints = mesh
            .boundary_edges()
            .iter()
            .map(|e| mid(e.nodes[0], e.nodes[1], &mut coords))
            .collect();
        Self {
            n_vertices: nv,
            coords,
            triangles,
            boundary_midpoints,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square;

    #[test]
    fn triangle_rule_is_degree_five() {
        let rule = triangle_rule();
        let wsum: f64 = rule.iter().map(|r| r.1).sum();
        assert!((wsum - 1.0).abs() < 1e-15);
        // ∫ λ0^a λ1^b λ2^c dA / area = 2 a! b! c! / (a+b+c+2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        for (a, b, c) in [(5, 0, 0), (2, 2, 1), (3, 1, 1), (4, 1, 0), (1, 1, 1)] {
            let q: f64 = rule
                .iter()
                .map(|(l, w)| w * l[0].powi(a) * l[1].powi(b) * l[2].powi(c))
                .sum();
            let exact = 2.0 * fact(a as u32) * fact(b as u32) * fact(c as u32) / fact((a + b + c) as u32 + 2);
            assert!((q - exact).abs() < 1e-15, "{a}{b}{c}: {q} vs {exact}");
        }
    }

    #[test]
    fn edge_rule_is_degree_five() {
        for k in 0..=5 {
            let q: f64 = edge_rule().iter().map(|(s, w)| w * s.powi(k)).sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn p2_basis_is_nodal_and_sums_to_one() {
        let e = Element::new([[0.0, 0.0], [2.0, 0.3], [0.4, 1.5]]);
        let nodes = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ];
        for (i, l) in nodes.iter().enumerate() {
            let v = Element::p2_values(*l);
            for (j, x) in v.iter().enumerate() {
                assert!((x - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let l = [0.2, 0.3, 0.5];
        let g = e.p2_grads(l);
        let (sx, sy) = g.iter().fold((0.0, 0.0), |a, g| (a.0 + g[0], a.1 + g[1]));
        assert!(sx.abs() < 1e-13 && sy.abs() < 1e-13);
        // gradient of the interpolant of x is (1, 0)
        let xs: Vec<f64> = nodes.iter().map(|l| e.point(*l)[0]).collect();
        let gx = g
            .iter()
            .zip(&xs)
            .fold([0.0, 0.0], |a, (g, x)| [a[0] + x * g[0], a[1] + x * g[1]]);
        assert!((gx[0] - 1.0).abs() < 1e-13 && gx[1].abs() < 1e-13);
    }

    #[test]
    fn p2_node_count() {
        let m = unit_square(3, 2, |_, _| 1).unwrap();
        let p = P2Nodes::new(&m);
        // vertices + edges = 12 + (3*3 + 4*2 + 6) = 12 + 23
        assert_eq!(p.len(), 35);
        assert_eq!(p.boundary_midpoints.len(), 10);
    }
}
