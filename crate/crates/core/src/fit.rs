//! Ordinary least-squares fits and their tabular form.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    Exponent,
    Expansion,
    EigenScaling,
    QuadraticBlowup,
}

impl fmt::Display for FitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitKind::Exponent => "exponent",
            FitKind::Expansion => "expansion",
            FitKind::EigenScaling => "eigen-scaling",
            FitKind::QuadraticBlowup => "quadratic-blowup",
        })
    }
}

/// A fitted model: coefficients, RMS misfit on the window, and named side
/// quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub kind: FitKind,
    pub coefficients: Vec<f64>,
    pub residual: f64,
    pub window: (f64, f64),
    pub extras: Vec<(String, f64)>,
}

impl FitResult {
    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// Rows `kind,coeff_index,value,residual` without a header.
    pub fn csv_rows(&self) -> String {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{},{},{},{}\n", self.kind, i, fmt_num(*c), fmt_num(self.residual)))
            .collect()
    }
}

pub const FIT_CSV_HEADER: &str = "kind,coeff_index,value,residual\n";

pub fn fit_csv(fits: &[FitResult]) -> String {
    let mut s = FIT_CSV_HEADER.to_string();
    for f in fits {
        s.push_str(&f.csv_rows());
    }
    s
}

pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v:.12e}")
}

/// Least squares `min |A c - b|` via column-scaled QR; returns the
/// coefficients and the RMS residual.
pub fn lstsq(rows: &[Vec<f64>], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = rows.len();
    let k = rows.first().map_or(0, |r| r.len());
    if m < k || k == 0 {
        return Err(Error::TooFewNodes(format!("{m} samples for {k} unknowns")));
    }
    let mut a = DMatrix::<f64>::zeros(m, k);
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    let scales: Vec<f64> = (0..k)
        .map(|j| {
            let n = a.column(j).norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    for j in 0..k {
        let s = scales[j];
        a.column_mut(j).iter_mut().for_each(|x| *x /= s);
    }
    let rhs = DVector::from_column_slice(b);
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * &rhs;
    let c = qr
        .r()
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::InvalidParameter("rank-deficient fit".into()))?;
    let res = &a * &c - &rhs;
    let rms = (res.norm_squared() / m as f64).sqrt();
    Ok(((0..k).map(|j| c[j] / scales[j]).collect(), rms))
}

/// Slope and intercept of `y = p x + q`, with RMS misfit.
pub fn line_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let rows: Vec<Vec<f64>> = x.iter().map(|&t| vec![t, 1.0]).collect();
    let (c, rms) = lstsq(&rows, y)?;
    Ok((c[0], c[1], rms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_polynomial() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x * x, x.powi(4)]).collect();
        let b: Vec<f64> = xs.iter().map(|&x| 2.0 - 3.0 * x * x + 0.5 * x.powi(4)).collect();
        let (c, rms) = lstsq(&rows, &b).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] + 3.0).abs() < 1e-11 && (c[2] - 0.5).abs() < 1e-10);
        assert!(rms < 1e-13);
    }

    #[test]
    fn line_through_noise_free_data() {
        let (p, q, r) = line_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((p - 2.0).abs() < 1e-14 && (q - 1.0).abs() < 1e-14 && r < 1e-14);
    }

    #[test]
    fn underdetermined_is_rejected() {
        assert!(lstsq(&[vec![1.0, 2.0]], &[1.0]).is_err());
    }
}
