//! Field and report export. Every file carries the config hash.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use viflow_core::assembly::edge_nodes;
use viflow_core::flow::FlowSolution;
use viflow_core::problem::AssembledSystem;

use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<fs::File, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::File::create(path).map_err(|e| io_err(path, e))
}

/// Legacy ASCII VTK: quadratic triangles on the P2 nodes plus boundary
/// lines; point data velocity and pressure, cell data patch tags (0 on
/// triangles).
pub fn write_vtk(path: &Path, sys: &AssembledSystem, sol: &FlowSolution, hash: &str) -> Result<(), CliError> {
    let nodes = &sys.dofmap.nodes;
    let mesh = &sys.spec.mesh;
    let mut s = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "viflow solution config-sha256={hash}");
    let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", nodes.len());
    for p in &nodes.coords {
        let _ = writeln!(s, "{:.17e} {:.17e} 0", p[0], p[1]);
    }
    let nt = nodes.triangles.len();
    let nb = mesh.boundary_edges().len();
    let _ = writeln!(s, "CELLS {} {}", nt + nb, nt * 7 + nb * 3);
    for t in &nodes.triangles {
        let _ = writeln!(s, "6 {} {} {} {} {} {}", t[0], t[1], t[2], t[3], t[4], t[5]);
    }
    for e in mesh.boundary_edges() {
        let _ = writeln!(s, "2 {} {}", e.nodes[0], e.nodes[1]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", nt + nb);
    for _ in 0..nt {
        let _ = writeln!(s, "22");
    }
    for _ in 0..nb {
        let _ = writeln!(s, "3");
    }
    let _ = writeln!(
        s,
        "CELL_DATA {}\nSCALARS patch_tag int 1\nLOOKUP_TABLE default",
        nt + nb
    );
    for _ in 0..nt {
        let _ = writeln!(s, "0");
    }
    for e in mesh.boundary_edges() {
        let _ = writeln!(s, "{}", e.tag);
    }
    let _ = writeln!(s, "POINT_DATA {}\nVECTORS velocity double", nodes.len());
    for v in sol.velocity.chunks(2) {
        let _ = writeln!(s, "{:.17e} {:.17e} 0", v[0], v[1]);
    }
    let _ = writeln!(s, "SCALARS pressure double 1\nLOOKUP_TABLE default");
    for p in pressure_p2(sys, &sol.pressure) {
        let _ = writeln!(s, "{p:.17e}");
    }
    create(path)?.write_all(s.as_bytes()).map_err(|e| io_err(path, e))
}

/// P1 pressure interpolated to the P2 nodes.
fn pressure_p2(sys: &AssembledSystem, p: &[f64]) -> Vec<f64> {
    let nodes = &sys.dofmap.nodes;
    let mut out = vec![0.0; nodes.len()];
    out[..nodes.n_vertices].copy_from_slice(&p[..nodes.n_vertices]);
    for t in &nodes.triangles {
        for (m, (a, b)) in [(3, (0, 1)), (4, (1, 2)), (5, (2, 0))] {
            out[t[m]] = 0.5 * (p[t[a]] + p[t[b]]);
        }
    }
    out
}

fn csv_writer(path: &Path, hash: &str) -> Result<csv::Writer<fs::File>, CliError> {
    let mut f = create(path)?;
    writeln!(f, "# config-sha256={hash}").map_err(|e| io_err(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

/// Boundary traces: one row per boundary edge and P2 node, in the edge
/// frame.
pub fn write_traces(path: &Path, sys: &AssembledSystem, sol: &FlowSolution, hash: &str) -> Result<(), CliError> {
    let mut w = csv_writer(path, hash)?;
    let err = |e: csv::Error| io_err(path, e);
    w.write_record([
        "edge", "tag", "kind", "node", "x", "y", "u_x", "u_y", "u_n", "u_tau", "g",
    ])
    .map_err(err)?;
    let mesh = &sys.spec.mesh;
    for (k, (e, eg)) in mesh.boundary_edges().iter().zip(sys.geometry.edges()).enumerate() {
        let patch = sys.spec.patches.iter().find(|p| p.tag == e.tag);
        let kind = patch.map_or(String::new(), |p| p.kind.name().to_string());
        for q in edge_nodes(mesh, &sys.dofmap.nodes, k) {
            let x = sys.dofmap.nodes.coords[q];
            let u = [sol.velocity[2 * q], sol.velocity[2 * q + 1]];
            let f = eg.frame;
            let g = patch
                .filter(|p| p.kind.is_friction())
                .map_or(String::new(), |p| format!("{:e}", p.threshold().eval(x)));
            w.write_record([
                k.to_string(),
                e.tag.to_string(),
                kind.clone(),
                q.to_string(),
                format!("{:e}", x[0]),
                format!("{:e}", x[1]),
                format!("{:e}", u[0]),
                format!("{:e}", u[1]),
                format!("{:e}", u[0] * f.n[0] + u[1] * f.n[1]),
                format!("{:e}", u[0] * f.tau[0] + u[1] * f.tau[1]),
                g,
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_multipliers(path: &Path, sys: &AssembledSystem, sol: &FlowSolution, hash: &str) -> Result<(), CliError> {
    let mut w = csv_writer(path, hash)?;
    let err = |e: csv::Error| io_err(path, e);
    w.write_record(["kind", "node", "dof", "x", "y", "trace", "sigma", "g", "weight"])
        .map_err(err)?;
    if let Some(m) = &sol.multipliers {
        for e in m.entries() {
            let x = sys.dofmap.nodes.coords[e.node];
            w.write_record([
                e.kind.name().to_string(),
                e.node.to_string(),
                e.dof.to_string(),
                format!("{:e}", x[0]),
                format!("{:e}", x[1]),
                format!("{:e}", e.sign * sol.w[e.dof]),
                format!("{:e}", e.sigma),
                format!("{:e}", e.g),
                format!("{:e}", e.weight),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_report(path: &Path, lines: &[String], hash: &str) -> Result<(), CliError> {
    let mut f = create(path)?;
    let mut text = format!("config-sha256: {hash}\n");
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

/// Writes the enabled formats and returns the files written.
pub fn export_all(
    dir: &Path,
    formats: &[String],
    sys: &AssembledSystem,
    sol: &FlowSolution,
    hash: &str,
) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    if formats.iter().any(|f| f == "vtk") {
        let p = dir.join("solution.vtk");
        write_vtk(&p, sys, sol, hash)?;
        out.push(p);
    }
    if formats.iter().any(|f| f == "csv") {
        let p = dir.join("traces.csv");
        write_traces(&p, sys, sol, hash)?;
        out.push(p);
        let p = dir.join("multipliers.csv");
        write_multipliers(&p, sys, sol, hash)?;
        out.push(p);
    }
    Ok(out)
}
