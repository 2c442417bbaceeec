//! One-dimensional quadrature rules.
//!
//! * [`GaussRule::legendre`] and [`GaussRule::jacobi`] build Gauss rules on
//!   `[-1, 1]` by the Golub-Welsch eigenvalue method.
//! * [`adaptive_gk15`] is a globally adaptive Gauss-Kronrod (7, 15) integrator
//!   used for the closed-form radial profiles.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Nodes and weights on `[-1, 1]` for the weight `(1 - t)^alpha (1 + t)^beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl GaussRule {
    pub fn legendre(order: usize) -> Result<Self> {
        GaussRule::jacobi(order, 0.0, 0.0)
    }

    pub fn jacobi(order: usize, alpha: f64, beta: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter("quadrature order 0".into()));
        }
        if !(alpha > -1.0 && beta > -1.0) {
            return Err(Error::InvalidParameter(format!(
                "jacobi exponents ({alpha}, {beta}) must exceed -1"
            )));
        }
        let ab = alpha + beta;
        let mut jm = DMatrix::<f64>::zeros(order, order);
        for i in 0..order {
            let k = i as f64;
            let denom = 2.0 * k + ab;
            let diag = if i == 0 {
                (beta - alpha) / (ab + 2.0)
            } else {
                (beta * beta - alpha * alpha) / (denom * (denom + 2.0))
            };
            jm[(i, i)] = diag;
            if i + 1 < order {
                let k1 = k + 1.0;
                let d1 = 2.0 * k1 + ab;
                let off = 2.0 / d1
                    * (k1 * (k1 + alpha) * (k1 + beta) * (k1 + ab) / ((d1 + 1.0) * (d1 - 1.0)))
                        .sqrt();
                jm[(i, i + 1)] = off;
                jm[(i + 1, i)] = off;
            }
        }
        // mu_0 = integral of the weight over [-1, 1]
        let mu0 = ((ab + 1.0) * 2f64.ln() + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
            - ln_gamma(ab + 2.0))
        .exp();
        let eig = jm.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], mu0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(GaussRule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
            alpha,
            beta,
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integral of `f` over `[a, b]` assuming the weight is absent (Legendre).
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * f(mid + half * t))
            .sum::<f64>()
    }

    /// Nodes and weights mapped to `[a, b]`, absorbing the Jacobian of the
    /// affine map including the weight's scaling, so that
    /// `sum w_i f(x_i) = int_a^b (b - x)^alpha (x - a)^beta f(x) dx`.
    pub fn mapped(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let scale = half.powf(1.0 + self.alpha + self.beta);
        let xs = self.nodes.iter().map(|t| mid + half * t).collect();
        let ws = self.weights.iter().map(|w| w * scale).collect();
        (xs, ws)
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

const GK15_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK15_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK15_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Estimate {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK15_WK[7] * fc;
    let mut g = GK15_WG[3] * fc;
    for i in 0..7 {
        let fx = f(c - h * GK15_X[i]) + f(c + h * GK15_X[i]);
        k += GK15_WK[i] * fx;
        if i % 2 == 1 {
            g += GK15_WG[i / 2] * fx;
        }
    }
    Estimate {
        value: k * h,
        error: ((k - g) * h).abs(),
    }
}

/// Globally adaptive Gauss-Kronrod integration of `f` over `[a, b]` to
/// absolute tolerance `tol`.
pub fn adaptive_gk15(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Estimate {
    if a == b {
        return Estimate { value: 0.0, error: 0.0 };
    }
    let mut panels = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..2000 {
        let total_err: f64 = panels.iter().map(|p| p.2.error).sum();
        if total_err <= tol {
            break;
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
            .expect("non-empty");
        let (lo, hi, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        panels.push((lo, mid, gk15(&f, lo, mid)));
        panels.push((mid, hi, gk15(&f, mid, hi)));
    }
    panels.sort_by(|x, y| x.0.total_cmp(&y.0));
    Estimate {
        value: panels.iter().map(|p| p.2.value).sum(),
        error: panels.iter().map(|p| p.2.error).sum(),
    }
}
