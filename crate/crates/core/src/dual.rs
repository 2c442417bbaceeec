//! The dual of the obstacle solution: a convex `u` with an isolated conical
//! singularity at the origin, its tangent cone, and the asymptotic
//! diagnostics built on the polar change of variables
//! `zeta(theta, s) = u / r` with `s = r^{n/2}`.

use std::f64::consts::PI;

use crate::body::{circle_directions, support_cone, ConvexBody2D, Point, SupportCone};
use crate::convex::{axis_slopes, legendre_transform, ma_measure};
use crate::error::{Error, Result};
use crate::fit::{line_fit, lstsq, FitKind, FitResult};
use crate::grid::{AxisBox, ScalarGrid};
use crate::obstacle::Field2;

/// Number of directions at which the tangent cone is sampled.
pub const CONE_DIRECTIONS: usize = 720;

/// `g(p) = 1 / f(p)`, the right-hand side of the dual equation evaluated
/// at the gradient `p = Du(x)`.
#[derive(Debug, Clone)]
pub struct GDesc {
    pub source: Field2,
}

impl GDesc {
    pub fn unit() -> Self {
        GDesc {
            source: Field2::Const(1.0),
        }
    }

    pub fn eval(&self, p: Point) -> f64 {
        1.0 / self.source.eval(&[p.x, p.y])
    }
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    /// Convex dual with `u(0) = 0`.
    pub u: ScalarGrid,
    /// Monge-Ampere measure of the origin node.
    pub c_star: f64,
    /// Area of the contact polygon.
    pub contact_area: f64,
    pub contact: ConvexBody2D,
    pub phi: SupportCone,
    /// Remainder `u - phi` on the grid of `u`.
    pub w: ScalarGrid,
    pub g: GDesc,
}

/// Legendre transform of the obstacle solution on a square dual grid with
/// the primal spacing, sized to stay inside the gradient image of `v`.
pub fn dualize(v: &ScalarGrid, contact: &ConvexBody2D, g: GDesc) -> Result<DualSolution> {
    if v.dim() != 2 {
        return Err(Error::UnsupportedDimension(v.dim()));
    }
    if !contact.is_empty() && !contact.origin_interior() {
        return Err(Error::OriginNotInterior);
    }
    let h = v.spacing()[0];
    let reach = axis_slopes(v)
        .iter()
        .map(|&(lo, hi)| lo.abs().min(hi.abs()))
        .fold(f64::INFINITY, f64::min);
    let half = ((0.75 * reach / h).floor() as usize).max(2);
    let r = half as f64 * h;
    let u = legendre_transform(v, &AxisBox::symmetric(2, r)?, &[2 * half + 1, 2 * half + 1])?;
    DualSolution::from_parts(u, contact.clone(), g)
}

impl DualSolution {
    /// Builds the dual record from a sampled `u` whose centre node sits at
    /// the origin, shifting `u` so that `u(0) = 0`.
    pub fn from_parts(u: ScalarGrid, contact: ConvexBody2D, g: GDesc) -> Result<Self> {
        if u.dim() != 2 {
            return Err(Error::UnsupportedDimension(u.dim()));
        }
        let centre: Vec<usize> = (0..2)
            .map(|k| (-u.origin()[k] / u.spacing()[k]).round() as usize)
            .collect();
        if centre.iter().zip(u.shape()).any(|(&c, &n)| c == 0 || c + 1 >= n)
            || (0..2).any(|k| u.coord(k, centre[k]).abs() > 1e-9 * u.spacing()[k])
        {
            return Err(Error::InvalidGrid("origin must be an interior node of u".into()));
        }
        let shift = u.get(&centre);
        let u = u.map(|_, val| val - shift)?;
        let dirs = circle_directions(CONE_DIRECTIONS);
        let phi = if contact.is_empty() {
            SupportCone::zero(&dirs)
        } else {
            support_cone(&contact, &dirs)?
        };
        let h = u.spacing()[0];
        let c_star = ma_measure(&u, &ConvexBody2D::regular(8, 0.5 * h))?;
        let cone = |x: &[f64]| {
            if contact.is_empty() {
                0.0
            } else {
                contact.support(Point::new(x[0], x[1]))
            }
        };
        let w = u.map(|x, val| val - cone(x))?;
        Ok(DualSolution {
            u,
            c_star,
            contact_area: contact.area(),
            contact,
            phi,
            w,
            g,
        })
    }

    /// Tangent cone `phi(x)`, the support function of the contact set.
    pub fn cone(&self, x: Point) -> f64 {
        if self.contact.is_empty() {
            0.0
        } else {
            self.contact.support(x)
        }
    }

    /// `u(x)` as the exact cone plus the cubic interpolant of the remainder.
    pub fn eval_u(&self, x: Point) -> Option<f64> {
        Some(self.cone(x) + self.w.sample_cubic(&[x.x, x.y])?)
    }

    /// Smallest remainder value; non-negative when `u >= phi`.
    pub fn w_min(&self) -> f64 {
        self.w.values().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Radius of the largest centred disk inside the grid of `u`.
    pub fn reach(&self) -> f64 {
        let b = self.u.bounding_box();
        (0..2)
            .map(|k| b.lo[k].abs().min(b.hi[k]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Log-log slope of `w(t ray)` against `t` on `window`, with `w` read by
/// cubic interpolation at 32 log-spaced radii.
pub fn exponent_fit(w: &ScalarGrid, ray: Point, window: (f64, f64)) -> Result<FitResult> {
    exponent_fit_fn(|x| w.sample_cubic(&[x.x, x.y]), ray, window, 32)
}

pub fn exponent_fit_fn(
    w: impl Fn(Point) -> Option<f64>,
    ray: Point,
    window: (f64, f64),
    samples: usize,
) -> Result<FitResult> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) || samples < 3 {
        return Err(Error::InvalidParameter(format!("window {window:?}")));
    }
    let ray = ray.scale(1.0 / ray.norm());
    let mut lx = Vec::with_capacity(samples);
    let mut ly = Vec::with_capacity(samples);
    for k in 0..samples {
        let t = lo * (hi / lo).powf(k as f64 / (samples - 1) as f64);
        let val = w(ray.scale(t)).ok_or_else(|| Error::InvalidParameter(format!("r = {t} outside grid")))?;
        if !(val > 0.0) {
            return Err(Error::InvalidParameter(format!("w({t}) = {val:.3e} is not positive")));
        }
        lx.push(t.ln());
        ly.push(val.ln());
    }
    let (slope, icpt, rms) = line_fit(&lx, &ly)?;
    Ok(FitResult {
        kind: FitKind::Exponent,
        coefficients: vec![slope, icpt.exp()],
        residual: rms,
        window,
        extras: vec![],
    })
}

/// Samples of `zeta(theta, s) = u / r` on a direction-by-`s` product grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarField {
    pub n: usize,
    pub thetas: Vec<f64>,
    pub s_nodes: Vec<f64>,
    /// `zeta[j][k] = zeta(thetas[j], s_nodes[k])`.
    pub zeta: Vec<Vec<f64>>,
    /// `zeta(theta, 0) = phi(theta)`.
    pub phi: Vec<f64>,
    /// `zeta_ss(theta, 0)` from the small-`s` extension.
    pub curvature: Vec<f64>,
    /// Smallest `s` sampled directly; below it the extension is used.
    pub s_valid: f64,
}

/// Number of directly sampled nodes used to fit the small-`s` extension.
const EXTENSION_NODES: usize = 3;

/// Polar samples of a dual solution in the plane. Radii below `4h` use the
/// extension `phi(theta) + zeta_ss(theta, 0) s^2 / 2`.
pub fn polar_field(dual: &DualSolution, thetas: &[f64], s_nodes: &[f64]) -> Result<PolarField> {
    let h = dual.u.spacing()[0];
    polar_field_fn(
        2,
        thetas,
        s_nodes,
        4.0 * h,
        |x| dual.eval_u(Point::new(x[0], x[1])),
        |t| dual.cone(Point::new(t.cos(), t.sin())),
    )
}

/// Polar samples of any `u` in `R^n`, probing along `r (cos theta, sin theta, 0, ..)`.
pub fn polar_field_fn(
    n: usize,
    thetas: &[f64],
    s_nodes: &[f64],
    r_valid: f64,
    u: impl Fn(&[f64]) -> Option<f64>,
    phi: impl Fn(f64) -> f64,
) -> Result<PolarField> {
    if n < 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    if thetas.is_empty() || s_nodes.iter().any(|&s| s < 0.0) || s_nodes.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidParameter("s nodes must be increasing and non-negative".into()));
    }
    let half_n = n as f64 / 2.0;
    let s_valid = r_valid.powf(half_n);
    let valid: Vec<usize> = (0..s_nodes.len())
        .filter(|&k| s_nodes[k] >= s_valid && s_nodes[k] > 0.0)
        .collect();
    let needs_extension = valid.len() < s_nodes.len();
    if needs_extension && valid.len() < EXTENSION_NODES {
        return Err(Error::TooFewNodes("not enough nodes above 4h for the extension".into()));
    }
    let mut zeta = Vec::with_capacity(thetas.len());
    let mut phis = Vec::with_capacity(thetas.len());
    let mut curv = Vec::with_capacity(thetas.len());
    for &t in thetas {
        let mut x = vec![0.0; n];
        let p0 = phi(t);
        let mut row = vec![0.0; s_nodes.len()];
        for &k in &valid {
            let r = s_nodes[k].powf(1.0 / half_n);
            x[0] = r * t.cos();
            x[1] = r * t.sin();
            let val = u(&x).ok_or_else(|| Error::InvalidParameter(format!("r = {r} outside grid")))?;
            row[k] = val / r;
        }
        // least squares for c in zeta = phi + c s^2 / 2 on the first valid nodes
        let first = &valid[..EXTENSION_NODES.min(valid.len())];
        let num: f64 = first.iter().map(|&k| (row[k] - p0) * s_nodes[k].powi(2) / 2.0).sum();
        let den: f64 = first.iter().map(|&k| s_nodes[k].powi(4) / 4.0).sum();
        let c = if den > 0.0 { num / den } else { 0.0 };
        for k in 0..s_nodes.len() {
            if s_nodes[k] < s_valid || s_nodes[k] == 0.0 {
                row[k] = p0 + 0.5 * c * s_nodes[k] * s_nodes[k];
            }
        }
        zeta.push(row);
        phis.push(p0);
        curv.push(c);
    }
    Ok(PolarField {
        n,
        thetas: thetas.to_vec(),
        s_nodes: s_nodes.to_vec(),
        zeta,
        phi: phis,
        curvature: curv,
        s_valid,
    })
}

/// `m` equally spaced angles covering the circle.
pub fn uniform_thetas(m: usize) -> Vec<f64> {
    (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect()
}

/// `count` equally spaced values on `[lo, hi]`.
pub fn uniform_nodes(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
        .collect()
}

fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

impl PolarField {
    /// True when the angles are uniform and cover the full circle.
    pub fn periodic(&self) -> bool {
        let m = self.thetas.len();
        if m < 4 {
            return false;
        }
        let d = 2.0 * PI / m as f64;
        self.thetas
            .iter()
            .enumerate()
            .all(|(j, &t)| (t - self.thetas[0] - j as f64 * d).abs() < 1e-12)
    }

    fn uniform_s(&self) -> bool {
        let s = &self.s_nodes;
        if s.len() < 2 {
            return false;
        }
        let d = s[1] - s[0];
        s.windows(2).all(|p| ((p[1] - p[0]) - d).abs() < 1e-12 * d.max(1.0))
    }

    /// `zeta(theta, s)`: periodic cubic interpolation in `theta`, cubic in
    /// `s` over the sampled range, and the quadratic extension below it.
    pub fn eval(&self, theta: f64, s: f64) -> f64 {
        let m = self.thetas.len();
        let d = 2.0 * PI / m as f64;
        let t = (theta - self.thetas[0]).rem_euclid(2.0 * PI) / d;
        let j = t.floor() as isize;
        let wt = catmull_rom(t - j as f64);
        let mut acc = 0.0;
        for (a, w) in wt.iter().enumerate() {
            let jj = (j - 1 + a as isize).rem_euclid(m as isize) as usize;
            acc += w * self.along_s(jj, s);
        }
        acc
    }

    fn along_s(&self, j: usize, s: f64) -> f64 {
        if s < self.s_valid {
            return self.phi[j] + 0.5 * self.curvature[j] * s * s;
        }
        let nodes = &self.s_nodes;
        let k = nodes.partition_point(|&x| x <= s).clamp(1, nodes.len() - 1) - 1;
        let row = &self.zeta[j];
        let (a, b) = (nodes[k], nodes[k + 1]);
        let u = (s - a) / (b - a);
        if k >= 1 && k + 2 < nodes.len() && nodes[k - 1] >= self.s_valid {
            let w = catmull_rom(u);
            w[0] * row[k - 1] + w[1] * row[k] + w[2] * row[k + 1] + w[3] * row[k + 2]
        } else {
            (1.0 - u) * row[k] + u * row[k + 1]
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,s,zeta\n");
        for (j, t) in self.thetas.iter().enumerate() {
            for (k, sk) in self.s_nodes.iter().enumerate() {
                s.push_str(&format!(
                    "{},{},{}\n",
                    crate::fit::fmt_num(*t),
                    crate::fit::fmt_num(*sk),
                    crate::fit::fmt_num(self.zeta[j][k])
                ));
            }
        }
        s
    }

    /// Largest `|zeta(theta, s) - zeta(theta', s)|` over the sampled nodes.
    pub fn angular_spread(&self) -> f64 {
        (0..self.s_nodes.len())
            .map(|k| {
                let col = self.zeta.iter().map(|r| r[k]);
                let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|zeta_s(theta, 0)|` from cubic fits on the directly sampled
    /// nodes with `s <= s_max`.
    pub fn zeta_s_at_zero(&self, s_max: f64) -> Result<f64> {
        let idx: Vec<usize> = (0..self.s_nodes.len())
            .filter(|&k| self.s_nodes[k] >= self.s_valid && self.s_nodes[k] <= s_max)
            .collect();
        let mut worst: f64 = 0.0;
        for row in &self.zeta {
            let rows: Vec<Vec<f64>> = idx
                .iter()
                .map(|&k| {
                    let s = self.s_nodes[k];
                    vec![1.0, s, s * s, s * s * s]
                })
                .collect();
            let b: Vec<f64> = idx.iter().map(|&k| row[k]).collect();
            let (c, _) = lstsq(&rows, &b)?;
            worst = worst.max(c[1].abs());
        }
        Ok(worst)
    }
}

/// Finite differences of a polar field at node `(j, k)`:
/// `(zeta, zeta_s, zeta_ss, zeta_t, zeta_tt, zeta_st)`.
fn polar_derivatives(zf: &PolarField, j: usize, k: usize) -> [f64; 6] {
    let m = zf.thetas.len();
    let ds = zf.s_nodes[1] - zf.s_nodes[0];
    let dt = 2.0 * PI / m as f64;
    let z = |jj: usize, kk: usize| zf.zeta[jj][kk];
    let (jp, jm) = ((j + 1) % m, (j + m - 1) % m);
    let c = z(j, k);
    let zs = (z(j, k + 1) - z(j, k - 1)) / (2.0 * ds);
    let zss = (z(j, k + 1) - 2.0 * c + z(j, k - 1)) / (ds * ds);
    let zt = (z(jp, k) - z(jm, k)) / (2.0 * dt);
    let ztt = (z(jp, k) - 2.0 * c + z(jm, k)) / (dt * dt);
    let zst = (z(jp, k + 1) - z(jp, k - 1) - z(jm, k + 1) + z(jm, k - 1)) / (4.0 * ds * dt);
    [c, zs, zss, zt, ztt, zst]
}

fn check_po2(zf: &PolarField) -> Result<()> {
    if zf.n != 2 {
        return Err(Error::UnsupportedDimension(zf.n));
    }
    if zf.s_nodes.len() < 5 || zf.thetas.len() < 5 {
        return Err(Error::TooFewNodes(format!(
            "{} x {} polar nodes, need at least 5 per axis",
            zf.thetas.len(),
            zf.s_nodes.len()
        )));
    }
    if !zf.periodic() || !zf.uniform_s() {
        return Err(Error::InvalidParameter("polar field must be uniform and periodic in theta".into()));
    }
    Ok(())
}

/// Entries of the polar-coordinate Monge-Ampere matrix in the plane:
/// `[[zeta_ss + 2 zeta_s / s, zeta_st], [zeta_st, zeta_tt + zeta + s zeta_s]]`.
fn po2_matrix(s: f64, d: &[f64; 6]) -> (f64, f64, f64) {
    let [z, zs, zss, _, ztt, zst] = *d;
    (zss + 2.0 * zs / s, zst, ztt + z + s * zs)
}

/// Residual `det M - gbar` on the interior `s` nodes, where `gbar` is `g`
/// composed with the gradient `Du = (zeta + s zeta_s) e_r + zeta_t e_theta`.
/// The output grid has axes `(theta, s)`.
pub fn po2_residual(zf: &PolarField, g: &GDesc) -> Result<ScalarGrid> {
    check_po2(zf)?;
    let m = zf.thetas.len();
    let ns = zf.s_nodes.len();
    let mut out = Vec::with_capacity(m * (ns - 2));
    for j in 0..m {
        let t = zf.thetas[j];
        let (er, et) = (Point::new(t.cos(), t.sin()), Point::new(-t.sin(), t.cos()));
        for k in 1..ns - 1 {
            let s = zf.s_nodes[k];
            let d = polar_derivatives(zf, j, k);
            let (a, b, c) = po2_matrix(s, &d);
            let grad = er.scale(d[0] + s * d[1]);
            let grad = Point::new(grad.x + d[3] * et.x, grad.y + d[3] * et.y);
            out.push(a * c - b * b - g.eval(grad));
        }
    }
    let ds = zf.s_nodes[1] - zf.s_nodes[0];
    ScalarGrid::new(
        vec![m, ns - 2],
        vec![zf.thetas[0], zf.s_nodes[1]],
        vec![2.0 * PI / m as f64, ds],
        out,
    )
}

/// Smallest values of the two diagonal entries over the interior nodes.
pub fn po2_diagonal_minima(zf: &PolarField) -> Result<(f64, f64)> {
    check_po2(zf)?;
    let mut lo = (f64::INFINITY, f64::INFINITY);
    for j in 0..zf.thetas.len() {
        for k in 1..zf.s_nodes.len() - 1 {
            let (a, _, c) = po2_matrix(zf.s_nodes[k], &polar_derivatives(zf, j, k));
            lo = (lo.0.min(a), lo.1.min(c));
        }
    }
    Ok(lo)
}

/// Per-direction least squares of `zeta(theta, .)` against
/// `sum_{i <= k_max} phi_i(theta) s^{2i}` on the directly sampled nodes in
/// `window`. Coefficients are averaged over directions; the extras carry
/// the odd-power competitor's misfit and the angular spread of each
/// coefficient.
pub fn expansion_fit(zf: &PolarField, k_max: usize, window: (f64, f64)) -> Result<FitResult> {
    if k_max > 3 {
        return Err(Error::InvalidParameter(format!("k_max = {k_max} exceeds 3")));
    }
    let idx: Vec<usize> = (0..zf.s_nodes.len())
        .filter(|&k| {
            let s = zf.s_nodes[k];
            s >= window.0.max(zf.s_valid) && s <= window.1
        })
        .collect();
    let even = |s: f64| (0..=k_max).map(|i| s.powi(2 * i as i32)).collect::<Vec<_>>();
    let odd = |s: f64| {
        std::iter::once(1.0)
            .chain((1..=k_max).map(|i| s.powi(2 * i as i32 - 1)))
            .collect::<Vec<_>>()
    };
    let mut sums = vec![0.0; k_max + 1];
    let mut lo = vec![f64::INFINITY; k_max + 1];
    let mut hi = vec![f64::NEG_INFINITY; k_max + 1];
    let (mut ss_even, mut ss_odd) = (0.0, 0.0);
    for row in &zf.zeta {
        let b: Vec<f64> = idx.iter().map(|&k| row[k]).collect();
        let rows_e: Vec<Vec<f64>> = idx.iter().map(|&k| even(zf.s_nodes[k])).collect();
        let rows_o: Vec<Vec<f64>> = idx.iter().map(|&k| odd(zf.s_nodes[k])).collect();
        let (c, re) = lstsq(&rows_e, &b)?;
        let (_, ro) = lstsq(&rows_o, &b)?;
        ss_even += re * re;
        ss_odd += ro * ro;
        for i in 0..=k_max {
            sums[i] += c[i];
            lo[i] = lo[i].min(c[i]);
            hi[i] = hi[i].max(c[i]);
        }
    }
    let m = zf.zeta.len() as f64;
    let (rms_e, rms_o) = ((ss_even / m).sqrt(), (ss_odd / m).sqrt());
    let mut extras = vec![
        ("odd_residual".to_string(), rms_o),
        ("even_odd_ratio".to_string(), rms_o / rms_e.max(f64::MIN_POSITIVE)),
    ];
    for i in 0..=k_max {
        extras.push((format!("phi{i}_spread"), hi[i] - lo[i]));
    }
    Ok(FitResult {
        kind: FitKind::Expansion,
        coefficients: sums.iter().map(|c| c / m).collect(),
        residual: rms_e,
        window,
        extras,
    })
}

/// Hessian of `u` at `r e` in the frame `(e, e_perp)` by centred
/// differences with steps `d` and `2d`, combined by Richardson
/// extrapolation. Radial stencil points stay on the ray through the apex,
/// where the cone is linear.
fn polar_hessian(u: &impl Fn(Point) -> Option<f64>, e: Point, r: f64, d: f64) -> Option<[f64; 3]> {
    let p = Point::new(-e.y, e.x);
    let at = |step: f64| -> Option<[f64; 3]> {
        let f = |a: f64, b: f64| {
            u(Point::new(
                e.x * (r + a * step) + p.x * b * step,
                e.y * (r + a * step) + p.y * b * step,
            ))
        };
        let c = f(0.0, 0.0)?;
        let hrr = (f(1.0, 0.0)? - 2.0 * c + f(-1.0, 0.0)?) / (step * step);
        let htt = (f(0.0, 1.0)? - 2.0 * c + f(0.0, -1.0)?) / (step * step);
        let hrt = (f(1.0, 1.0)? - f(1.0, -1.0)? - f(-1.0, 1.0)? + f(-1.0, -1.0)?) / (4.0 * step * step);
        Some([hrr, htt, hrt])
    };
    let (a, b) = (at(d)?, at(2.0 * d)?);
    Some([0, 1, 2].map(|i| a[i] + (a[i] - b[i]) / 3.0))
}

fn sym_eigen(h: [f64; 3]) -> (f64, f64) {
    let [a, c, b] = h;
    let m = 0.5 * (a + c);
    let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (m + r, m - r)
}

/// Largest-to-smallest ratio a scaling may vary by over the window and
/// still count as a fixed positive band.
pub const EIGEN_BAND_RATIO: f64 = 2.0;

/// Eigenvalue scalings along `rays` equally spaced rays at `samples` radii
/// in `window`: `r lambda_max` and `lambda_min / r^{n-1}` (n = 2). Each is
/// fitted as `c0 + c1 r^2`; the coefficients are `[c0_tan, c1_tan, c0_rad,
/// c1_rad]`. The extras report the band ratios and whether both stay in a
/// positive band (`conforming` = 1).
pub fn eigen_scaling_check(dual: &DualSolution, window: (f64, f64), rays: usize, samples: usize) -> Result<FitResult> {
    let h = dual.u.spacing()[0];
    eigen_scaling_fn(|x| dual.eval_u(x), h, window, rays, samples)
}

pub fn eigen_scaling_fn(
    u: impl Fn(Point) -> Option<f64>,
    step: f64,
    window: (f64, f64),
    rays: usize,
    samples: usize,
) -> Result<FitResult> {
    if !(window.0 > 0.0 && window.1 > window.0) || samples < 3 || rays == 0 {
        return Err(Error::InvalidParameter(format!("window {window:?}")));
    }
    let mut rows = Vec::new();
    let mut tan = Vec::new();
    let mut rad = Vec::new();
    for j in 0..rays {
        let t = 2.0 * PI * (j as f64 + 0.5) / rays as f64;
        let e = Point::new(t.cos(), t.sin());
        for k in 0..samples {
            let r = window.0 + (window.1 - window.0) * k as f64 / (samples - 1) as f64;
            let hs = polar_hessian(&u, e, r, step)
                .ok_or_else(|| Error::InvalidParameter(format!("stencil at r = {r} leaves the grid")))?;
            let (big, small) = sym_eigen(hs);
            rows.push(vec![1.0, r * r]);
            tan.push(r * big);
            rad.push(small / r);
        }
    }
    let (ct, rt) = lstsq(&rows, &tan)?;
    let (cr, rr) = lstsq(&rows, &rad)?;
    let band = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (tl, th) = band(&tan);
    let (rl, rh) = band(&rad);
    let conforming = tl > 0.0 && rl > 0.0 && th / tl <= EIGEN_BAND_RATIO && rh / rl <= EIGEN_BAND_RATIO;
    Ok(FitResult {
        kind: FitKind::EigenScaling,
        coefficients: vec![ct[0], ct[1], cr[0], cr[1]],
        residual: rt.max(rr),
        window,
        extras: vec![
            ("tan_min".into(), tl),
            ("tan_max".into(), th),
            ("rad_min".into(), rl),
            ("rad_max".into(), rh),
            ("tan_at_rmin".into(), tan[0]),
            ("rad_at_rmin".into(), rad[0]),
            ("conforming".into(), if conforming { 1.0 } else { 0.0 }),
        ],
    })
}

/// Rescaled profile `[zeta(theta0 + l p, l t) - zeta(theta0, 0) - l zeta_theta(theta0, 0) p] / l^2`
/// on `p in [-1, 1]`, `t in [0, 1]` (21 x 11 nodes), and its quadratic fit
/// `c00 t^2 / 2 + c01 t p + c11 p^2 / 2` with coefficients `[c00, c01, c11]`.
pub fn blow_up_profile(zf: &PolarField, theta0: f64, lambda: f64) -> Result<(ScalarGrid, FitResult)> {
    let s_max = *zf.s_nodes.last().unwrap_or(&0.0);
    if !(lambda > 0.0 && lambda <= 0.5 * s_max) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} outside (0, {}]", 0.5 * s_max)));
    }
    if !zf.periodic() {
        return Err(Error::InvalidParameter("polar field must be periodic in theta".into()));
    }
    let dt = 2.0 * PI / zf.thetas.len() as f64;
    let z0 = zf.eval(theta0, 0.0);
    let zt0 = (zf.eval(theta0 + dt, 0.0) - zf.eval(theta0 - dt, 0.0)) / (2.0 * dt);
    let grid = ScalarGrid::from_fn(vec![21, 11], vec![-1.0, 0.0], vec![0.1, 0.1], |x| {
        let (p, t) = (x[0], x[1]);
        (zf.eval(theta0 + lambda * p, lambda * t) - z0 - lambda * zt0 * p) / (lambda * lambda)
    })?;
    let mut rows = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let x = grid.node(&grid.multi_index(i));
        let (p, t) = (x[0], x[1]);
        rows.push(vec![0.5 * t * t, t * p, 0.5 * p * p]);
    }
    let (c, rms) = lstsq(&rows, grid.values())?;
    let fit = FitResult {
        kind: FitKind::QuadraticBlowup,
        coefficients: c,
        residual: rms,
        window: (0.0, lambda),
        extras: vec![],
    };
    Ok((grid, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::RadialBenchmark;

    fn radial_dual(h: f64, reach: f64) -> DualSolution {
        let rb = RadialBenchmark::new(2);
        let u = ScalarGrid::square(reach, h, |x| rb.dual(x[0].hypot(x[1]))).unwrap();
        DualSolution::from_parts(u, ConvexBody2D::regular(4096, rb.a), GDesc::unit()).unwrap()
    }

    #[test]
    fn synthetic_cube_has_slope_three() {
        let w = ScalarGrid::square(1.0, 1.0 / 64.0, |x| x[0].hypot(x[1]).powi(3)).unwrap();
        let fit = exponent_fit(&w, Point::new(1.0, 0.0), (0.1, 0.6)).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-4, "{}", fit.coefficients[0]);
        let fit = exponent_fit_fn(|x| Some(x.norm().powi(3)), Point::new(0.3, 0.4), (0.05, 0.3), 32).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn radial_dual_record() {
        let d = radial_dual(1.0 / 32.0, 1.0);
        assert!((d.contact_area - 1.0).abs() < 1e-5);
        assert!(d.phi.values.iter().all(|&p| (p - PI.powf(-0.5)).abs() < 1e-6));
        assert!(d.w_min() > -1e-9);
        assert!((d.c_star - 1.0).abs() < 0.05, "c* {}", d.c_star);
    }

    #[test]
    fn synthetic_expansion_is_exact() {
        let thetas = uniform_thetas(8);
        let s = uniform_nodes(0.0, 0.5, 26);
        let zf = polar_field_fn(2, &thetas, &s, 0.0, |x| {
            let r = x[0].hypot(x[1]);
            Some(r * (1.0 + r * r))
        }, |_| 1.0)
        .unwrap();
        let fit = expansion_fit(&zf, 2, (0.0, 0.5)).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-11);
        assert!(fit.coefficients[2].abs() < 1e-10);
    }

    #[test]
    fn synthetic_po2_residual_is_second_order() {
        let (p0, p1) = (0.7, 0.4);
        let thetas = uniform_thetas(16);
        let s = uniform_nodes(0.0, 0.4, 81);
        let zf = polar_field_fn(2, &thetas, &s, 0.0, |x| {
            let r = x[0].hypot(x[1]);
            Some(r * (p0 + p1 * r * r))
        }, |_| p0)
        .unwrap();
        let g = GDesc {
            source: Field2::Const(1.0 / (6.0 * p1 * p0)),
        };
        let res = po2_residual(&zf, &g).unwrap();
        for i in 0..res.len() {
            let sk = res.node(&res.multi_index(i))[1];
            assert!(res.values()[i].abs() <= 18.0 * p1 * p1 * sk * sk + 1e-9);
        }
    }

    #[test]
    fn po2_needs_five_nodes() {
        let zf = polar_field_fn(2, &uniform_thetas(8), &[0.1, 0.2, 0.3], 0.0, |x| Some(x[0].hypot(x[1])), |_| 1.0).unwrap();
        assert_eq!(po2_residual(&zf, &GDesc::unit()).unwrap_err().token(), "too-few-nodes");
    }

    #[test]
    fn quadratic_blowup_reproduces_itself() {
        let thetas = uniform_thetas(64);
        let s = uniform_nodes(0.0, 0.5, 51);
        // zeta = 1 + s^2 / 2 + (1 - cos theta), whose blow-up at theta0 = 0 is t^2/2 + p^2/2
        let zf = polar_field_fn(2, &thetas, &s, 0.0, |x| {
            let r = x[0].hypot(x[1]);
            let t = x[1].atan2(x[0]);
            Some(r * (1.0 + 0.5 * r * r + (1.0 - t.cos())))
        }, |t| 1.0 + (1.0 - t.cos()))
        .unwrap();
        for lambda in [0.05, 0.1, 0.2] {
            let (_, fit) = blow_up_profile(&zf, 0.0, lambda).unwrap();
            assert!((fit.coefficients[0] - 1.0).abs() < 2e-3, "{:?}", fit.coefficients);
            assert!(fit.coefficients[1].abs() < 1e-3);
            assert!((fit.coefficients[2] - 1.0).abs() < 2e-2);
        }
    }

    #[test]
    fn quadratic_fails_the_scaling_check() {
        let u = ScalarGrid::square(1.0, 1.0 / 64.0, |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        let d = DualSolution::from_parts(u, ConvexBody2D::empty(), GDesc::unit()).unwrap();
        let fit = eigen_scaling_check(&d, (0.05, 0.5), 8, 10).unwrap();
        assert_eq!(fit.extra("conforming"), Some(0.0));
        assert!((fit.extra("tan_at_rmin").unwrap() - 0.05).abs() < 1e-9);
        assert!(d.c_star < 1e-3);
        assert!(d.phi.is_zero());
    }
}
