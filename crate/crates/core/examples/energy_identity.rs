//! Weighted energy identity for a Gaussian on the half-space: the Dirichlet
//! energy against x_n^b equals the pairing of u with its source.

use mafb::grid::ScalarGrid;
use mafb::halfspace::HalfGridFunction;
use mafb::keldysh::{energy_identity_check, GaussianPair};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, r, h) = (3, 5.0, 1.0 / 16.0);
    let k = (r / h) as usize;
    let g = ScalarGrid::from_fn(vec![2 * k + 1, 2 * k + 1, k + 1], vec![-r, -r, 0.0], vec![h; 3], |x| {
        (-x.iter().map(|v| v * v).sum::<f64>()).exp()
    })?;
    let u = HalfGridFunction::new(g)?;
    for b in [1.2, 5.0 / 3.0, 2.0] {
        let pair = GaussianPair { n, b };
        let e = energy_identity_check(&u, &|x| pair.f(x), b)?;
        println!("b = {b:.4}: energy {:.8}, pairing {:.8}, relative gap {:.2e}", e.lhs, e.rhs, e.rel_gap);
    }
    Ok(())
}
