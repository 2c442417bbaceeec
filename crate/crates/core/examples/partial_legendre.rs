//! Partial Legendre transform in the tangential variable: the sampled
//! example33 profile maps onto its closed-form conjugate, and transforming
//! twice returns the original.

use mafb::grid::AxisBox;
use mafb::halfspace::{partial_legendre, HalfGridFunction, ModelSolution, SecondOrder};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let b = 1.5;
    let m = ModelSolution::Example33 { n: 2, b };
    let exact = ModelSolution::Example33Conjugate { n: 2, b };
    let psi = HalfGridFunction::sample(&m, &AxisBox::symmetric(1, 1.0)?, (0.5, 1.5), &[4097, 21])?;
    let star = partial_legendre(&psi, &AxisBox::symmetric(1, 0.5)?, Some(&[51]))?;
    let mut err = 0.0f64;
    for i in 0..star.grid.len() {
        let y = star.grid.node(&star.grid.multi_index(i));
        err = err.max((star.grid.values()[i] - exact.value(&y)?).abs());
    }
    println!("sampled conjugate vs closed form: {err:.3e}");
    let back = partial_legendre(&star, &AxisBox::symmetric(1, 0.3)?, Some(&[31]))?;
    let mut trip = 0.0f64;
    for i in 0..back.grid.len() {
        let x = back.grid.node(&back.grid.multi_index(i));
        trip = trip.max((back.grid.values()[i] - m.value(&x)?).abs());
    }
    println!("round trip: {trip:.3e}");
    Ok(())
}
