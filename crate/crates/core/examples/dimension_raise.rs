//! Rotating x_n into a plane lifts a solution with weight exponent b in
//! dimension n to one with exponent b - 1 in dimension n + 1; this checks
//! the lifted residual of a Gaussian.

use mafb::grid::ScalarGrid;
use mafb::halfspace::HalfGridFunction;
use mafb::keldysh::{dimension_raise, GaussianPair};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = 1.0 / 32.0;
    for (n, b, r) in [(2, 2.0, 2.0), (3, 5.0 / 3.0, 1.0)] {
        let k = (r / h) as usize;
        let mut shape = vec![2 * k + 1; n];
        shape[n - 1] = k + 1;
        let mut origin = vec![-r; n];
        origin[n - 1] = 0.0;
        let g = ScalarGrid::from_fn(shape, origin, vec![h; n], |x| (-x.iter().map(|v| v * v).sum::<f64>()).exp())?;
        let u = HalfGridFunction::new(g)?;
        let pair = GaussianPair { n, b };
        let rep = dimension_raise(&u, &|x| -pair.f(x), b)?;
        println!(
            "n = {n}, b = {b:.4}: lifted grid {:?}, max residual {:.2e} over {} nodes, Neumann defect {:.1e}",
            rep.raised.shape(),
            rep.max_residual,
            rep.checked,
            rep.neumann_defect
        );
    }
    Ok(())
}
