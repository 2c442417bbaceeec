//! Obstacle problem with the source 1 + x1^2/2: the contact set is no
//! longer a disk, but the unit section of the dual cone is still its polar.

use mafb::body::{hausdorff, polar_body};
use mafb::dual::{dualize, GDesc};
use mafb::obstacle::{extract_free_boundary, solve_obstacle_with, Field2, ObstacleProblem, SolverOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = 1.0 / 32.0;
    let source = Field2::custom(|x| 1.0 + 0.5 * x[0] * x[0]);
    let problem = ObstacleProblem {
        half_width: 2.0,
        h,
        source: source.clone(),
        boundary: Field2::Radial { scale: 1.0 },
    };
    let opts = SolverOptions {
        max_sweeps: Some(20000),
        ..Default::default()
    };
    let sol = solve_obstacle_with(&problem, &opts)?;
    let fb = extract_free_boundary(&sol.v, h)?;
    let extent = |pick: fn(&mafb::body::Point) -> f64| {
        let vals = fb.contact_set.vertices.iter().map(pick);
        vals.clone().fold(f64::NEG_INFINITY, f64::max) - vals.fold(f64::INFINITY, f64::min)
    };
    println!(
        "{} sweeps; contact set extent {:.4} along x1, {:.4} along x2",
        sol.sweeps,
        extent(|p| p.x),
        extent(|p| p.y)
    );
    let d = dualize(&sol.v, &fb.contact_set, GDesc { source })?;
    let e = hausdorff(&d.phi.section()?.vertices, &polar_body(&fb.contact_set)?.vertices);
    println!("c* = {:.4}, duality distance {e:.3e} (2h = {:.3e})", d.c_star, 2.0 * h);
    Ok(())
}
