//! Far-field decay of the solution operator applied to a compactly
//! supported bump, against the rate |x|^{-(n-2+b)}.

use std::sync::Arc;

use mafb::keldysh::{decay_fit, decay_samples, Keldysh, KeldyshConfig, Source, WeightedField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (n, b) in [(3, 5.0 / 3.0), (2, 2.0)] {
        let cfg = KeldyshConfig::new(n, b)?;
        let k = Keldysh::new(cfg.clone())?;
        let bump: Source = Arc::new(|y: &[f64]| {
            let r2: f64 = y.iter().map(|v| v * v).sum();
            if r2 < 1.0 {
                (1.0 - r2).powi(2)
            } else {
                0.0
            }
        });
        let f = WeightedField::from_fn(n, b, 1.0, 0.25, bump)?;
        let mut dir = vec![1.0; n];
        dir[0] = 0.5;
        let radii: Vec<f64> = (0..6).map(|i| 3.0 * 1.25f64.powi(i)).collect();
        let samples = decay_samples(&k, &f, &dir, &radii)?;
        let fit = decay_fit(&samples, &cfg)?;
        println!(
            "n = {n}, b = {b:.4}: fitted slope {:.4}, expected {:.4}",
            fit.coefficients[0],
            -cfg.decay_exponent()
        );
    }
    Ok(())
}
