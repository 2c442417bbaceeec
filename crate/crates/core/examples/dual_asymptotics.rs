//! Near-apex analysis of the radial dual: growth exponent of u - phi,
//! expansion of the polar profile in powers of s, and eigenvalue scalings.

use std::f64::consts::PI;

use mafb::body::Point;
use mafb::cli::pipelines::sampled_radial_dual;
use mafb::dual::{eigen_scaling_check, expansion_fit, exponent_fit, polar_field, uniform_nodes, uniform_thetas};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = sampled_radial_dual(1.0 / 64.0)?;
    for j in 0..4 {
        let t = PI * j as f64 / 4.0;
        let fit = exponent_fit(&d.w, Point::new(t.cos(), t.sin()), (0.05, 0.3))?;
        println!("ray {t:.3}: log-log slope of u - phi = {:.4}", fit.coefficients[0]);
    }
    let zf = polar_field(&d, &uniform_thetas(64), &uniform_nodes(0.0, 0.5, 41))?;
    let exp = expansion_fit(&zf, 3, (0.05, 0.3))?;
    println!("profile coefficients {:.6?}", exp.coefficients);
    println!("even-power fit beats odd-power by {:.1}x", exp.extra("even_odd_ratio").unwrap_or(f64::NAN));
    let eig = eigen_scaling_check(&d, (0.05, 0.5), 16, 10)?;
    println!(
        "r * lambda_tan -> {:.4} (1/sqrt(pi) = {:.4}); lambda_rad / r -> {:.4} (sqrt(pi) = {:.4})",
        eig.extra("tan_at_rmin").unwrap_or(f64::NAN),
        1.0 / PI.sqrt(),
        eig.extra("rad_at_rmin").unwrap_or(f64::NAN),
        PI.sqrt()
    );
    Ok(())
}
