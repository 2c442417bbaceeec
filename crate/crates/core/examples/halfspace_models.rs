//! Closed-form half-space solutions and the residuals of the equations they
//! solve, with analytic derivatives at a few interior points.

use mafb::halfspace::{blow1_residual, ma31_residual, ma41_residual, pde002_residual, r31_residual, ModelSolution};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pts3 = vec![vec![0.3, -0.2, 0.7], vec![-0.9, 0.1, 0.2], vec![0.5, 0.5, 1.4]];
    let pts2 = vec![vec![0.3, 0.7], vec![-0.6, 0.25], vec![0.9, 1.2]];
    let worst = |r: Vec<f64>| r.into_iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let b = 1.5;
    let ex31 = ModelSolution::by_name("example31", 2, 0.5)?;
    println!("example31          {:.2e}", worst(r31_residual(&ex31, 0.5, &pts2)?));
    let ex33 = ModelSolution::by_name("example33", 3, b)?;
    println!("example33          {:.2e}", worst(blow1_residual(&ex33, b, &pts3)?));
    let conj = ModelSolution::by_name("example33-conjugate", 3, b)?;
    println!("example33 partial  {:.2e}", worst(pde002_residual(&conj, b, &pts3)?));
    for name in ["jw_radial", "jw_flat"] {
        let m = ModelSolution::by_name(name, 3, b)?;
        println!("{name:<18} {:.2e}", worst(ma31_residual(&m, &pts3)?));
    }
    let savin = ModelSolution::by_name("savin", 3, b)?;
    println!("savin              {:.2e}", worst(ma41_residual(&savin, &pts3)?));
    let q = ModelSolution::normalized_quadratic(3, b)?;
    println!("quadratic          {:.2e}", worst(blow1_residual(&q, b, &pts3)?));
    Ok(())
}
