//! Weighted Calderon-Zygmund decomposition of a piecewise-constant field on
//! the half-space and the verification of its three properties.

use mafb::cz::{cz_decompose, cz_verify, random_cell_field};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = random_cell_field(&mut rng, 2)?;
    for (alpha, b) in [(0.5, 1.5), (4.0, 2.0)] {
        let dec = cz_decompose(&f, alpha, b)?;
        let rep = cz_verify(&dec, &f);
        println!(
            "alpha = {alpha}, b = {b}: seed side {}, {} stopping cubes, constant {}",
            dec.seed_side,
            dec.cubes.len(),
            rep.constant
        );
        for row in &rep.rows {
            println!("  {:<16} worst {:.3e} bound {:.3e} {}", row.property, row.worst, row.bound, if row.pass { "ok" } else { "FAIL" });
        }
    }
    Ok(())
}
