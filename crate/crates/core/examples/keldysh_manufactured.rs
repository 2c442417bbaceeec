//! Applies the solution operator of the Keldysh problem to the source of a
//! known Gaussian solution and compares the result pointwise.
//!
//! cargo run --example keldysh_manufactured [n] [b]

use mafb::keldysh::{GaussianPair, Keldysh, KeldyshConfig, WeightedField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(3), |a| a.parse())?;
    let b: f64 = args.next().map_or(Ok(5.0 / 3.0), |a| a.parse())?;
    let cfg = KeldyshConfig::new(n, b)?;
    println!("n = {n}, b = {b:.4}, kernel constant {:.6}", cfg.d_b());
    let k = Keldysh::new(cfg)?;
    let pair = GaussianPair { n, b };
    let f = WeightedField::from_fn(n, b, 6.0, 0.5, pair.source())?;
    let points: Vec<Vec<f64>> = [0.0, 0.3, 0.8, 1.4]
        .iter()
        .map(|&t| {
            let mut x = vec![0.5 * t; n];
            x[n - 1] = t;
            x
        })
        .collect();
    for (x, v) in points.iter().zip(k.apply_many(&f, &points)?) {
        println!("x = {x:.2?}: T_b f = {v:.8}, exp(-|x|^2) = {:.8}", pair.u(x));
    }
    Ok(())
}
