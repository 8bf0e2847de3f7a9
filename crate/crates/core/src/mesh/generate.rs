//! Structured meshers for rectangles and disks.

use std::f64::consts::PI;

use super::{Mesh, Point};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RectSide {
    Bottom,
    Right,
    Top,
    Left,
}

/// Rectangle `[x0, x1] × [y0, y1]` split into `nx × ny` cells, two triangles
/// per cell. `tag(side, midpoint)` assigns the patch tag of each boundary
/// edge.
///
/// The two cells touching the bottom-right and top-left corners use the other
/// diagonal, so no triangle has all three vertices on the boundary.
pub fn structured_rectangle(
    [x0, x1]: [f64; 2],
    [y0, y1]: [f64; 2],
    nx: usize,
    ny: usize,
    tag: impl Fn(RectSide, Point) -> u8,
) -> Result<Mesh> {
    if nx == 0 || ny == 0 || !(x1 > x0) || !(y1 > y0) {
        return Err(Error::InvalidArgument(format!(
            "rectangle needs positive extent and cell counts, got {nx}x{ny}"
        )));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = x0 + (x1 - x0) * i as f64 / nx as f64;
            let y = y0 + (y1 - y0) * j as f64 / ny as f64;
            nodes.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (p00, p10, p11, p01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            let flip = (nx > 1 || ny > 1) && ((i == nx - 1 && j == 0) || (i == 0 && j == ny - 1));
            if flip {
                triangles.push([p00, p10, p01]);
                triangles.push([p10, p11, p01]);
            } else {
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            }
        }
    }
    let mid = |a: usize, b: usize| -> Point {
        let (p, q) = (nodes[a], nodes[b]);
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    };
    let mut boundary = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        let (a, b) = (id(i, 0), id(i + 1, 0));
        boundary.push((a, b, tag(RectSide::Bottom, mid(a, b))));
    }
    for j in 0..ny {
        let (a, b) = (id(nx, j), id(nx, j + 1));
        boundary.push((a, b, tag(RectSide::Right, mid(a, b))));
    }
    for i in (0..nx).rev() {
        let (a, b) = (id(i + 1, ny), id(i, ny));
        boundary.push((a, b, tag(RectSide::Top, mid(a, b))));
    }
    for j in (0..ny).rev() {
        let (a, b) = (id(0, j + 1), id(0, j));
        boundary.push((a, b, tag(RectSide::Left, mid(a, b))));
    }
    Mesh::from_parts(nodes, triangles, boundary)
}

/// Unit square with `nx × ny` cells.
pub fn unit_square(nx: usize, ny: usize, tag: impl Fn(RectSide, Point) -> u8) -> Result<Mesh> {
    structured_rectangle([0.0, 1.0], [0.0, 1.0], nx, ny, tag)
}

/// Disk of the given radius centred at the origin. Ring `k` (1..=rings)
/// carries `base·k` equally spaced nodes, so the mesh has `base·rings²`
/// triangles and the boundary is a regular `base·rings`-gon inscribed in the
/// circle. `tag(midpoint)` assigns boundary patch tags.
pub fn structured_disk(rings: usize, base: usize, radius: f64, tag: impl Fn(Point) -> u8) -> Result<Mesh> {
    if rings == 0 || base < 3 || !(radius > 0.0) {
        return Err(Error::InvalidArgument(
            "disk needs rings >= 1, base >= 3 and a positive radius".into(),
        ));
    }
    let mut nodes: Vec<Point> = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    let mut ring_len = vec![1usize];
    for k in 1..=rings {
        let m = base * k;
        let r = radius * k as f64 / rings as f64;
        ring_start.push(nodes.len());
        ring_len.push(m);
        for j in 0..m {
            let t = 2.0 * PI * j as f64 / m as f64;
            nodes.push([r * t.cos(), r * t.sin()]);
        }
    }
    let mut triangles = Vec::with_capacity(base * rings * rings);
    for j in 0..base {
        let s = ring_start[1];
        triangles.push([0, s + j, s + (j + 1) % base]);
    }
    for k in 2..=rings {
        // merge the inner and outer rings by angle
        let (si, mi) = (ring_start[k - 1], ring_len[k - 1]);
        let (so, mo) = (ring_start[k], ring_len[k]);
        let (mut a, mut b) = (0usize, 0usize);
        while a < mi || b < mo {
            let ta = (a + 1) as f64 / mi as f64;
            let tb = (b + 1) as f64 / mo as f64;
            let inner = si + a % mi;
            let outer = so + b % mo;
            if b < mo && (a >= mi || tb <= ta) {
                triangles.push([inner, outer, so + (b + 1) % mo]);
                b += 1;
            } else {
                triangles.push([inner, outer, si + (a + 1) % mi]);
                a += 1;
            }
        }
    }
    let (so, mo) = (ring_start[rings], ring_len[rings]);
    let boundary = (0..mo)
        .map(|j| {
            let (a, b) = (so + j, so + (j + 1) % mo);
            let (p, q) = (nodes[a], nodes[b]);
            (a, b, tag([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]))
        })
        .collect();
    Mesh::from_parts(nodes, triangles, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boundary_vertex_count(m: &Mesh, t: usize) -> usize {
        let on: std::collections::HashSet<usize> = m.boundary_edges().iter().flat_map(|e| e.nodes).collect();
        m.triangles()[t].iter().filter(|n| on.contains(n)).count()
    }

    #[test]
    fn square_has_no_all_boundary_triangle() {
        for (nx, ny) in [(2, 2), (3, 5), (8, 8)] {
            let m = unit_square(nx, ny, |_, _| 1).unwrap();
            assert_eq!(m.triangles().len(), 2 * nx * ny);
            assert!((m.area() - 1.0).abs() < 1e-13);
            for t in 0..m.triangles().len() {
                assert!(boundary_vertex_count(&m, t) < 3, "triangle {t} on {nx}x{ny}");
            }
        }
    }

    #[test]
    fn disk_area_approaches_pi() {
        let m = structured_disk(8, 32, 1.0, |_| 1).unwrap();
        assert_eq!(m.triangles().len(), 32 * 64);
        // inscribed 256-gon area
        let n = 256.0;
        let exact = 0.5 * n * (2.0 * PI / n).sin();
        assert!((m.area() - exact).abs() < 1e-10);
        for t in 0..m.triangles().len() {
            assert!(boundary_vertex_count(&m, t) < 3);
        }
    }

    #[test]
    fn side_tags_are_applied() {
        let m = unit_square(2, 2, |s, _| match s {
            RectSide::Bottom => 8,
            _ => 1,
        })
        .unwrap();
        for e in m.boundary_edges() {
            let y = 0.5 * (m.nodes()[e.nodes[0]][1] + m.nodes()[e.nodes[1]][1]);
            assert_eq!(e.tag == 8, y == 0.0);
        }
    }
}
