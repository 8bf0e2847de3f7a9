//! Channel flow with the wall threshold equal to the Poiseuille wall stress:
//! every wall dof sits on the stick/slip boundary.

use viflow_core::benchmarks::channel_slip;
use viflow_core::flow::{run, RunOptions};
use viflow_core::problem::Equation;

#[test]
fn threshold_at_wall_stress_converges() {
    for (nx, ny) in [(8, 4), (16, 8)] {
        for g in [0.1 - 1e-12, 0.1, 0.1 + 1e-12] {
            let spec = channel_slip(Equation::Stokes, nx, ny, g).unwrap();
            let (_, sol) = run(&spec, &RunOptions::default()).unwrap();
            assert!(sol.converged(), "{nx}x{ny} g = {g}");
            assert!(sol.complementarity.as_ref().unwrap().pass, "{nx}x{ny} g = {g}");
            let wall = sol.w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(wall < 1e-8, "{nx}x{ny} g = {g}: correction {wall:e}");
        }
    }
}
