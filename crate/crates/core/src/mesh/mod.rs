//! Tagged triangle meshes, boundary frames and curvature, boundary patches.
//!
//! Mesh text format:
//!
//! ```text
//! viflow-mesh 1
//! nodes N
//! x y            (N lines)
//! triangles M
//! i j k          (M lines, 0-based, counter-clockwise)
//! boundary B
//! i j tag        (B lines, tag in 1..=11)
//! ```
//!
//! Tokens are whitespace separated and `#` starts a comment.

mod generate;
mod geometry;
mod patch;

use std::collections::HashMap;
use std::path::Path;

pub use generate::{structured_disk, structured_rectangle, unit_square, RectSide};
pub use geometry::{
    compute_boundary_frames, identity_residual, BoundaryGeometry, EdgeGeometry, Frame, Identity, NodeGeometry,
    PointField,
};
pub use patch::{
    check_admissibility, AdmissibilityReport, BoundaryPatch, Diagnostic, PatchData, PatchKind, ScalarField, Severity,
    VectorField,
};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Boundary edge oriented with the domain on its left (counter-clockwise on
/// outer loops).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: u8,
    /// The unique triangle containing this edge.
    pub triangle: usize,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    loops: Vec<Vec<usize>>,
}

/// Where a validation problem was found, so the parser can map it to a line.
#[derive(Debug)]
enum Entry {
    None,
    Triangle(usize),
    Boundary(usize),
}

#[derive(Debug)]
struct Issue {
    entry: Entry,
    message: String,
}

fn issue(entry: Entry, message: impl Into<String>) -> Issue {
    Issue {
        entry,
        message: message.into(),
    }
}

impl Mesh {
    /// Builds and validates a mesh from raw parts.
    pub fn from_parts(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<(usize, usize, u8)>,
    ) -> Result<Self> {
        Self::validate(nodes, triangles, boundary).map_err(|e| match e.entry {
            Entry::Triangle(i) => Error::InvalidMesh(format!("triangle {i}: {}", e.message)),
            Entry::Boundary(i) => Error::InvalidMesh(format!("boundary edge {i}: {}", e.message)),
            Entry::None => Error::InvalidMesh(e.message),
        })
    }

    fn validate(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<(usize, usize, u8)>,
    ) -> std::result::Result<Self, Issue> {
        let nn = nodes.len();
        if let Some(p) = nodes.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(issue(Entry::None, format!("node {p} has a non-finite coordinate")));
        }
        let mut edge_tris: HashMap<(usize, usize), Vec<(usize, bool)>> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nn) {
                return Err(issue(Entry::Triangle(t), "node index out of range"));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(issue(Entry::Triangle(t), "repeated node"));
            }
            if signed_area(&nodes, tri) <= 0.0 {
                return Err(issue(Entry::Triangle(t), "inverted triangle (clockwise or degenerate)"));
            }
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                // `true` when the triangle traverses the edge as min -> max
                edge_tris.entry(key(a, b)).or_default().push((t, a < b));
            }
        }
        if let Some((e, _)) = edge_tris.iter().find(|(_, v)| v.len() > 2) {
            return Err(issue(
                Entry::None,
                format!("edge {}-{} shared by more than two triangles", e.0, e.1),
            ));
        }

        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::with_capacity(boundary.len());
        for (b, &(i, j, tag)) in boundary.iter().enumerate() {
            if i >= nn || j >= nn {
                return Err(issue(Entry::Boundary(b), "node index out of range"));
            }
            if !(1..=11).contains(&tag) {
                return Err(issue(Entry::Boundary(b), format!("patch tag {tag} outside 1..=11")));
            }
            let k = key(i, j);
            if let Some(prev) = seen.insert(k, b) {
                return Err(issue(
                    Entry::Boundary(b),
                    format!("double-tagged edge {i}-{j} (also boundary entry {prev})"),
                ));
            }
            let owners = edge_tris.get(&k).map(Vec::as_slice).unwrap_or(&[]);
            match owners {
                [(t, forward)] => {
                    let nodes = if *forward { [k.0, k.1] } else { [k.1, k.0] };
                    edges.push(BoundaryEdge {
                        nodes,
                        tag,
                        triangle: *t,
                    });
                }
                [] => return Err(issue(Entry::Boundary(b), "edge is not a triangle edge")),
                _ => return Err(issue(Entry::Boundary(b), "edge is interior (two triangles)")),
            }
        }
        let mut untagged: Vec<_> = edge_tris
            .iter()
            .filter(|(k, v)| v.len() == 1 && !seen.contains_key(k))
            .map(|(k, _)| *k)
            .collect();
        untagged.sort_unstable();
        if let Some(&(a, b)) = untagged.first() {
            return Err(issue(Entry::None, format!("untagged edge {a}-{b} on the boundary")));
        }

        let loops = trace_loops(&edges).map_err(|m| issue(Entry::None, m))?;
        Ok(Self {
            nodes,
            triangles,
            boundary: edges,
            loops,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let err = |line: usize, m: &str| Error::MeshParse {
            line,
            message: m.to_string(),
        };
        let (ln, header) = lines.next().ok_or_else(|| err(1, "empty mesh file"))?;
        if header.split_whitespace().collect::<Vec<_>>() != ["viflow-mesh", "1"] {
            return Err(err(ln, "expected header 'viflow-mesh 1'"));
        }

        fn section<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, name: &str) -> Result<(usize, usize)> {
            let (ln, l) = lines.next().ok_or_else(|| Error::MeshParse {
                line: 0,
                message: format!("missing '{name}' section"),
            })?;
            let tok: Vec<_> = l.split_whitespace().collect();
            match tok.as_slice() {
                [n, count] if *n == name => count.parse().map(|c| (ln, c)).map_err(|_| Error::MeshParse {
                    line: ln,
                    message: format!("bad count '{count}'"),
                }),
                _ => Err(Error::MeshParse {
                    line: ln,
                    message: format!("expected '{name} <count>'"),
                }),
            }
        }

        fn row<'a, T: std::str::FromStr>(
            lines: &mut impl Iterator<Item = (usize, &'a str)>,
            arity: usize,
            what: &str,
        ) -> Result<(usize, Vec<T>)> {
            let (ln, l) = lines.next().ok_or_else(|| Error::MeshParse {
                line: 0,
                message: format!("unexpected end of file in {what} section"),
            })?;
            let vals: std::result::Result<Vec<T>, _> = l.split_whitespace().map(str::parse::<T>).collect();
            match vals {
                Ok(v) if v.len() == arity => Ok((ln, v)),
                _ => Err(Error::MeshParse {
                    line: ln,
                    message: format!("malformed {what} line '{l}'"),
                }),
            }
        }

        let (_, nn) = section(&mut lines, "nodes")?;
        let mut nodes = Vec::with_capacity(nn);
        for _ in 0..nn {
            let (_, v) = row::<f64>(&mut lines, 2, "node")?;
            nodes.push([v[0], v[1]]);
        }
        let (_, nt) = section(&mut lines, "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        let mut tri_lines = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, v) = row::<usize>(&mut lines, 3, "triangle")?;
            triangles.push([v[0], v[1], v[2]]);
            tri_lines.push(ln);
        }
        let (bl, nb) = section(&mut lines, "boundary")?;
        let mut boundary = Vec::with_capacity(nb);
        let mut bnd_lines = Vec::with_capacity(nb);
        for _ in 0..nb {
            let (ln, v) = row::<usize>(&mut lines, 3, "boundary")?;
            let tag = u8::try_from(v[2]).map_err(|_| err(ln, "patch tag out of range"))?;
            boundary.push((v[0], v[1], tag));
            bnd_lines.push(ln);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(err(ln, "trailing content after boundary section"));
        }
        Self::validate(nodes, triangles, boundary).map_err(|e| {
            let line = match e.entry {
                Entry::Triangle(i) => tri_lines[i],
                Entry::Boundary(i) => bnd_lines[i],
                Entry::None => bl,
            };
            Error::MeshParse {
                line,
                message: e.message,
            }
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::from("viflow-mesh 1\n");
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(s, "{:.17e} {:.17e}", p[0], p[1]);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "boundary {}", self.boundary.len());
        for e in &self.boundary {
            let _ = writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], e.tag);
        }
        s
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Closed boundary loops as ordered lists of boundary-edge indices.
    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.loops
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.nodes, &self.triangles[t])
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Sorted, deduplicated patch tags present on the boundary.
    pub fn tags(&self) -> Vec<u8> {
        let mut t: Vec<u8> = self.boundary.iter().map(|e| e.tag).collect();
        t.sort_unstable();
        t.dedup();
        t
    }

    /// Copy of the mesh with every boundary tag remapped.
    pub fn retagged(&self, f: impl Fn(&BoundaryEdge, Point) -> u8) -> Result<Self> {
        let raw = self
            .boundary
            .iter()
            .map(|e| {
                let (a, b) = (self.nodes[e.nodes[0]], self.nodes[e.nodes[1]]);
                let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                (e.nodes[0], e.nodes[1], f(e, mid))
            })
            .collect();
        Self::from_parts(self.nodes.clone(), self.triangles.clone(), raw)
    }

    /// Applies `f` to every node coordinate.
    pub fn mapped(&self, f: impl Fn(Point) -> Point) -> Result<Self> {
        let nodes = self.nodes.iter().map(|&p| f(p)).collect();
        let raw = self.boundary.iter().map(|e| (e.nodes[0], e.nodes[1], e.tag)).collect();
        Self::from_parts(nodes, self.triangles.clone(), raw)
    }
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn signed_area(nodes: &[Point], t: &[usize; 3]) -> f64 {
    let [a, b, c] = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn trace_loops(edges: &[BoundaryEdge]) -> std::result::Result<Vec<Vec<usize>>, String> {
    let mut out_of: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut in_count: HashMap<usize, usize> = HashMap::new();
    for (k, e) in edges.iter().enumerate() {
        out_of.entry(e.nodes[0]).or_default().push(k);
        *in_count.entry(e.nodes[1]).or_default() += 1;
    }
    for (node, outs) in &out_of {
        let ins = in_count.get(node).copied().unwrap_or(0);
        if outs.len() != 1 || ins != 1 {
            return Err(format!(
                "open or non-manifold boundary at node {node} ({} outgoing, {ins} incoming edges)",
                outs.len()
            ));
        }
    }
    if let Some((&node, _)) = in_count.iter().find(|(n, _)| !out_of.contains_key(n)) {
        return Err(format!("open boundary: chain ends at node {node}"));
    }
    let mut used = vec![false; edges.len()];
    let mut loops = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut lp = Vec::new();
        let mut k = start;
        loop {
            used[k] = true;
            lp.push(k);
            k = out_of[&edges[k].nodes[1]][0];
            if k == start {
                break;
            }
            if used[k] {
                return Err("open boundary: loop does not close".into());
            }
        }
        loops.push(lp);
    }
    Ok(loops)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "viflow-mesh 1
# unit square, two triangles
nodes 4
0 0
1 0
1 1
0 1
triangles 2
0 1 2
0 2 3
boundary 4
0 1 1
1 2 1
2 3 1
3 0 1
";

    #[test]
    fn parses_smallest_square() {
        let m = Mesh::parse(SQUARE).unwrap();
        assert_eq!(m.nodes().len(), 4);
        assert_eq!(m.triangles().len(), 2);
        assert_eq!(m.boundary_edges().len(), 4);
        assert_eq!(m.boundary_loops().len(), 1);
        assert!((m.area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn double_tagged_edge_is_rejected_with_line() {
        let text = SQUARE.replace("boundary 4\n", "boundary 5\n0 1 8\n");
        match Mesh::parse(&text) {
            Err(Error::MeshParse { line, message }) => {
                assert!(message.contains("double-tagged edge"), "{message}");
                assert_eq!(line, 13);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn untagged_edge_is_rejected() {
        let text = SQUARE.replace("boundary 4\n", "boundary 3\n").replace("3 0 1\n", "");
        let e = Mesh::parse(&text).unwrap_err();
        assert!(e.to_string().contains("untagged edge"), "{e}");
    }

    #[test]
    fn inverted_triangle_is_rejected() {
        let text = SQUARE.replace("0 2 3\n", "0 3 2\n");
        match Mesh::parse(&text) {
            Err(Error::MeshParse { line, message }) => {
                assert!(message.contains("inverted"), "{message}");
                assert_eq!(line, 10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_position() {
        let text = SQUARE.replace("1 1\n0 1\n", "1 one\n0 1\n");
        match Mesh::parse(&text) {
            Err(Error::MeshParse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn text_round_trip() {
        let m = unit_square(3, 2, |_, _| 1).unwrap();
        let back = Mesh::parse(&m.to_text()).unwrap();
        assert_eq!(back.nodes(), m.nodes());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.boundary_edges(), m.boundary_edges());
    }

    #[test]
    fn disk_has_one_closed_loop() {
        let m = structured_disk(4, 4, 1.0, |_| 3).unwrap();
        assert_eq!(m.triangles().len(), 64);
        assert_eq!(m.boundary_loops().len(), 1);
        // traversal: each edge's end is the next edge's start
        let lp = &m.boundary_loops()[0];
        assert_eq!(lp.len(), 16);
        let e = m.boundary_edges();
        for w in 0..lp.len() {
            assert_eq!(e[lp[w]].nodes[1], e[lp[(w + 1) % lp.len()]].nodes[0]);
        }
    }
}
