//! Legendre-transforms a solved obstacle problem into the singular dual:
//! point mass at the origin, tangent cone, and the section-polar duality.

use mafb::body::{hausdorff, polar_body};
use mafb::dual::{dualize, GDesc};
use mafb::obstacle::{extract_free_boundary, solve_obstacle_with, ObstacleProblem, SolverOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = 1.0 / 32.0;
    let problem = ObstacleProblem::radial(h);
    let v = solve_obstacle_with(&problem, &SolverOptions::default())?.v;
    let fb = extract_free_boundary(&v, h)?;
    let d = dualize(&v, &fb.contact_set, GDesc::unit())?;
    println!("dual grid {:?} over radius {:.3}", d.u.shape(), d.reach());
    println!("point mass c* = {:.5} (contour area {:.5})", d.c_star, d.contact_area);
    println!("min of u - phi: {:.3e}", d.w_min());
    let section = d.phi.section()?;
    let polar = polar_body(&fb.contact_set)?;
    println!(
        "section {{phi < 1}} vs polar of the contact set: {:.3e}",
        hausdorff(&section.vertices, &polar.vertices)
    );
    Ok(())
}
