//! Solves the unit-source radial obstacle problem and compares the free
//! boundary with the circle of area one.
//!
//! cargo run --example obstacle_radial [h-denominator]

use mafb::body::hausdorff_to_circle;
use mafb::obstacle::{extract_free_boundary, solve_obstacle_with, ObstacleProblem, SolverOptions};
use mafb::radial::RadialBenchmark;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let denom: f64 = std::env::args().nth(1).map_or(Ok(32.0), |a| a.parse())?;
    let h = 1.0 / denom;
    let problem = ObstacleProblem::radial(h);
    let sol = solve_obstacle_with(&problem, &SolverOptions::default())?;
    let fb = extract_free_boundary(&sol.v, h)?;
    let radius = RadialBenchmark::new(2).a;
    println!("h = 1/{denom}: {} sweeps, residual {:.2e}", sol.sweeps, sol.residual);
    println!("contact nodes {}, contact area {:.4}", sol.contact_nodes, fb.contact_set.area());
    println!(
        "distance to the circle of radius {radius:.5}: {:.4e} (2h = {:.4e})",
        hausdorff_to_circle(&fb.polyline, radius),
        2.0 * h
    );
    println!("hull defect {:.2e}", fb.hull_defect);
    Ok(())
}
