//! Closed-form radial benchmark for the obstacle problem with unit source and
//! unit contact area, together with its Legendre dual.
//!
//! In `R^n` the primal profile vanishes on the ball of radius
//! `a = omega_n^{-1/n}` (so the contact set has measure one) and satisfies
//! `v'(rho) = (rho^n - a^n)^{1/n}` outside. The dual profile has
//! `u'(r) = (r^n + a^n)^{1/n}`, which inverts `v'`.

use crate::quad::adaptive_gk15;
use crate::special::unit_ball_volume;

#[derive(Debug, Clone, Copy)]
pub struct RadialBenchmark {
    pub n: usize,
    /// Contact radius `omega_n^{-1/n}`.
    pub a: f64,
}

impl RadialBenchmark {
    pub fn new(n: usize) -> Self {
        let a = unit_ball_volume(n).powf(-1.0 / n as f64);
        RadialBenchmark { n, a }
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// Primal obstacle solution `v(rho)`, zero inside the contact ball. The
    /// substitution `t = a + s^n` removes the endpoint singularity before
    /// adaptive quadrature.
    pub fn primal(&self, rho: f64) -> f64 {
        if rho <= self.a {
            return 0.0;
        }
        let n = self.nf();
        let a = self.a;
        let smax = (rho - a).powf(1.0 / n);
        let integrand = |s: f64| {
            let t = a + s.powf(n);
            let inner = (t.powf(n) - a.powf(n)).max(0.0);
            inner.powf(1.0 / n) * n * s.powf(n - 1.0)
        };
        adaptive_gk15(integrand, 0.0, smax, 1e-13).value
    }

    pub fn primal_slope(&self, rho: f64) -> f64 {
        if rho <= self.a {
            0.0
        } else {
            (rho.powf(self.nf()) - self.a.powf(self.nf())).powf(1.0 / self.nf())
        }
    }

    /// Dual solution `u(r) = int_0^r (t^n + a^n)^{1/n} dt`.
    pub fn dual(&self, r: f64) -> f64 {
        let n = self.nf();
        let an = self.a.powf(n);
        adaptive_gk15(|t: f64| (t.powf(n) + an).powf(1.0 / n), 0.0, r.abs(), 1e-14).value
    }

    pub fn dual_slope(&self, r: f64) -> f64 {
        let n = self.nf();
        (r.abs().powf(n) + self.a.powf(n)).powf(1.0 / n)
    }

    pub fn dual_second(&self, r: f64) -> f64 {
        let n = self.nf();
        let r = r.abs();
        r.powf(n - 1.0) * (r.powf(n) + self.a.powf(n)).powf(1.0 / n - 1.0)
    }

    /// Remainder `w = u - a r` above the tangent cone.
    pub fn remainder(&self, r: f64) -> f64 {
        let n = self.nf();
        let an = self.a.powf(n);
        let a = self.a;
        adaptive_gk15(|t: f64| (t.powf(n) + an).powf(1.0 / n) - a, 0.0, r.abs(), 1e-16).value
    }

    /// Coefficients of `u / r = sum_i c_i r^{n i}` from the binomial series,
    /// valid for `r^n < a^n`.
    pub fn expansion(&self, terms: usize) -> Vec<f64> {
        let n = self.nf();
        let q = 1.0 / n;
        let an = self.a.powf(n);
        // (t^n + a^n)^{1/n} = a sum_k C(q, k) (t^n / a^n)^k
        // integrate and divide by r: a C(q,k) r^{nk} / (a^{nk} (nk + 1))
        let mut out = Vec::with_capacity(terms);
        let mut binom = 1.0;
        for k in 0..terms {
            if k > 0 {
                binom *= (q - (k as f64 - 1.0)) / k as f64;
            }
            let kf = k as f64;
            out.push(self.a * binom / (an.powf(kf) * (n * kf + 1.0)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn planar_constants() {
        let rb = RadialBenchmark::new(2);
        assert!((rb.a - PI.powf(-0.5)).abs() < 1e-15);
        let c = rb.expansion(3);
        assert!((c[0] - 0.564_189_583_547_756_3).abs() < 1e-12);
        assert!((c[1] - PI.sqrt() / 6.0).abs() < 1e-12);
        assert!((c[2] + PI.powf(1.5) / 40.0).abs() < 1e-12);
    }

    #[test]
    fn primal_matches_closed_form_in_the_plane() {
        // int sqrt(t^2 - a^2) dt = (t s - a^2 ln(t + s)) / 2 with s = sqrt(t^2 - a^2)
        let rb = RadialBenchmark::new(2);
        let a = rb.a;
        for rho in [0.6, 1.0, 2.0, 2.0 * 2f64.sqrt()] {
            let s = (rho * rho - a * a).sqrt();
            let exact = 0.5 * (rho * s - a * a * ((rho + s) / a).ln());
            assert!((rb.primal(rho) - exact).abs() < 1e-10, "rho {rho}");
        }
        assert_eq!(rb.primal(0.3), 0.0);
    }

    #[test]
    fn dual_slope_inverts_primal_slope() {
        for n in [2, 3] {
            let rb = RadialBenchmark::new(n);
            for r in [0.01, 0.2, 0.9] {
                let p = rb.dual_slope(r);
                assert!((rb.primal_slope(p) - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn radial_monge_ampere_is_one() {
        // det D^2 u = u'' (u'/r)^{n-1}
        for n in [2, 3] {
            let rb = RadialBenchmark::new(n);
            for r in [0.05, 0.3, 0.7] {
                let det = rb.dual_second(r) * (rb.dual_slope(r) / r).powi(n as i32 - 1);
                assert!((det - 1.0).abs() < 1e-12);
            }
        }
    }
}
