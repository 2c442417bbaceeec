//! Green function and solution operator of the singular Neumann problem
//! `-Δu - b u_n / x_n = f` on the upper half-space, together with the
//! weighted measure `mu_b = x_n^b dx` and the quantitative identities
//! built on it.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::{line_fit, FitKind, FitResult};
use crate::grid::ScalarGrid;
use crate::halfspace::HalfGridFunction;
use crate::quad::GaussRule;
use crate::special::gamma;

pub type Source = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Below this ratio `|x-y|^2 / |x-y*|^2` the tau-integral is split into
/// geometrically graded panels.
const GRADED_RATIO: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct KeldyshConfig {
    pub n: usize,
    pub b: f64,
    /// Gauss-Jacobi order for the tau-integral.
    pub tau_order: usize,
    /// Gauss points per axis on a spatial cell.
    pub cell_order: usize,
    /// Dyadic refinement levels for cells near the evaluation point.
    pub near_levels: usize,
    /// Cells farther than this from the origin are skipped.
    pub radius: f64,
}

impl KeldyshConfig {
    pub fn new(n: usize, b: f64) -> Result<Self> {
        let cfg = KeldyshConfig {
            n,
            b,
            tau_order: 32,
            cell_order: 6,
            near_levels: 3,
            radius: 6.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.n) {
            return Err(Error::UnsupportedDimension(self.n));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::InvalidParameter(format!("b = {} must be positive", self.b)));
        }
        if self.tau_order == 0 || self.cell_order == 0 {
            return Err(Error::InvalidParameter("quadrature order 0".into()));
        }
        Ok(())
    }

    /// `2^{b-2} pi^{-n/2} Gamma((n+b-2)/2) / Gamma(b/2)`.
    pub fn d_b(&self) -> f64 {
        let n = self.n as f64;
        2f64.powf(self.b - 2.0) * std::f64::consts::PI.powf(-n / 2.0) * gamma((n + self.b - 2.0) / 2.0)
            / gamma(self.b / 2.0)
    }

    /// Decay exponent `n - 2 + b` of the operator far from the source.
    pub fn decay_exponent(&self) -> f64 {
        self.n as f64 - 2.0 + self.b
    }
}

/// Quadrature tables for one configuration.
pub struct Keldysh {
    cfg: KeldyshConfig,
    d_b: f64,
    power: f64,
    tau: (Vec<f64>, Vec<f64>),
    first: GaussRule,
    middle: GaussRule,
    last: GaussRule,
    cell: GaussRule,
    bottom: GaussRule,
}

impl Keldysh {
    pub fn new(cfg: KeldyshConfig) -> Result<Self> {
        cfg.validate()?;
        let beta = cfg.b / 2.0 - 1.0;
        let tau = GaussRule::jacobi(cfg.tau_order, beta, beta)?.mapped(0.0, 1.0);
        let panel = (cfg.tau_order / 2).max(16);
        Ok(Keldysh {
            d_b: cfg.d_b(),
            power: (cfg.n as f64 - 2.0 + cfg.b) / 2.0,
            tau,
            first: GaussRule::jacobi(panel, 0.0, beta)?,
            middle: GaussRule::legendre(panel)?,
            last: GaussRule::jacobi(panel, beta, 0.0)?,
            cell: GaussRule::legendre(cfg.cell_order)?,
            bottom: GaussRule::jacobi(cfg.cell_order, 0.0, cfg.b)?,
            cfg,
        })
    }

    pub fn config(&self) -> &KeldyshConfig {
        &self.cfg
    }

    /// `K_b(x, y)`.
    pub fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let n = self.cfg.n;
        if x.len() != n || y.len() != n {
            return Err(Error::UnsupportedDimension(x.len().max(y.len())));
        }
        if x[n - 1] < 0.0 || y[n - 1] < 0.0 {
            return Err(Error::InvalidParameter("points must lie in the closed upper half-space".into()));
        }
        let (a, bb) = distances(x, y);
        if a == 0.0 {
            return Err(Error::Diagonal);
        }
        Ok(self.d_b * self.tau_integral(a, bb))
    }

    fn tau_integral(&self, a: f64, bb: f64) -> f64 {
        let p = self.power;
        let g = |t: f64| (a + (bb - a) * t).powf(-p);
        let r = a / bb;
        if r >= GRADED_RATIO {
            return self.tau.0.iter().zip(&self.tau.1).map(|(t, w)| w * g(*t)).sum();
        }
        let beta = self.cfg.b / 2.0 - 1.0;
        let mut breaks = vec![0.0, r];
        while *breaks.last().unwrap() * 4.0 < 0.5 {
            let t = *breaks.last().unwrap() * 4.0;
            breaks.push(t);
        }
        breaks.push(1.0);
        let k = breaks.len() - 1;
        let mut sum = 0.0;
        for i in 0..k {
            let (lo, hi) = (breaks[i], breaks[i + 1]);
            let (rule, weight): (&GaussRule, &dyn Fn(f64) -> f64) = if i == 0 {
                (&self.first, &|t: f64| (1.0 - t).powf(beta))
            } else if i == k - 1 {
                (&self.last, &|t: f64| t.powf(beta))
            } else {
                (&self.middle, &|t: f64| (t * (1.0 - t)).powf(beta))
            };
            let (ts, ws) = rule.mapped(lo, hi);
            sum += ts.iter().zip(&ws).map(|(t, w)| w * weight(*t) * g(*t)).sum::<f64>();
        }
        sum
    }

    /// `T_b(f)(x) = int K_b(x, y) y_n^b f(y) dy` over the cells of `f`'s grid.
    pub fn apply(&self, f: &WeightedField, x: &[f64]) -> Result<f64> {
        let n = self.cfg.n;
        if f.dim() != n || x.len() != n {
            return Err(Error::UnsupportedDimension(f.dim()));
        }
        if (f.b - self.cfg.b).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("field weight b = {} differs from {}", f.b, self.cfg.b)));
        }
        if x[n - 1] < 0.0 {
            return Err(Error::InvalidParameter("evaluation point below x_n = 0".into()));
        }
        let g = &f.grid.grid;
        let sz = g.spacing().to_vec();
        let cells: Vec<usize> = g.shape().iter().map(|k| k - 1).collect();
        let total: usize = cells.iter().product();
        let eval = |y: &[f64]| f.eval(y);
        let mut sum = 0.0;
        let mut lo = vec![0.0; n];
        for c in 0..total {
            let mut rest = c;
            let mut corner = vec![0usize; n];
            for k in (0..n).rev() {
                corner[k] = rest % cells[k];
                rest /= cells[k];
                lo[k] = g.origin()[k] + corner[k] as f64 * sz[k];
            }
            if box_distance(&vec![0.0; n], &lo, &sz) > self.cfg.radius {
                continue;
            }
            if f.exact.is_none() && cell_is_zero(g, &corner) {
                continue;
            }
            sum += self.box_integral(x, &lo, &sz, 0, &eval)?;
        }
        if !sum.is_finite() {
            return Err(Error::NonFinite("T_b value".into()));
        }
        Ok(sum)
    }

    /// [`Keldysh::apply`] at many points.
    pub fn apply_many(&self, f: &WeightedField, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        points.par_iter().map(|x| self.apply(f, x)).collect()
    }

    fn box_integral(&self, x: &[f64], lo: &[f64], sz: &[f64], level: usize, f: &dyn Fn(&[f64]) -> Result<f64>) -> Result<f64> {
        let s = sz.iter().cloned().fold(0.0, f64::max);
        let d = box_distance(x, lo, sz);
        if d >= 2.0 * s * (1.0 - 1e-9) {
            return self.gauss_box(x, lo, sz, f);
        }
        if level < self.cfg.near_levels {
            let n = lo.len();
            let half: Vec<f64> = sz.iter().map(|v| v / 2.0).collect();
            let mut sum = 0.0;
            let mut child = vec![0.0; n];
            for mask in 0..(1usize << n) {
                for k in 0..n {
                    child[k] = lo[k] + if (mask >> k) & 1 == 1 { half[k] } else { 0.0 };
                }
                sum += self.box_integral(x, &child, &half, level + 1, f)?;
            }
            return Ok(sum);
        }
        self.duffy_box(x, lo, sz, f)
    }

    /// Tensor Gauss rule; the bottom layer absorbs `y_n^b` into a Jacobi rule.
    fn gauss_box(&self, x: &[f64], lo: &[f64], sz: &[f64], f: &dyn Fn(&[f64]) -> Result<f64>) -> Result<f64> {
        let n = lo.len();
        let m = self.cell.order();
        let b = self.cfg.b;
        let on_bottom = lo[n - 1] == 0.0;
        let mut axes: Vec<(Vec<f64>, Vec<f64>)> = (0..n - 1)
            .map(|k| self.cell.mapped(lo[k], lo[k] + sz[k]))
            .collect();
        let (tn, mut wn) = if on_bottom {
            self.bottom.mapped(0.0, sz[n - 1])
        } else {
            self.cell.mapped(lo[n - 1], lo[n - 1] + sz[n - 1])
        };
        if !on_bottom {
            wn.iter_mut().zip(&tn).for_each(|(w, t)| *w *= t.powf(b));
        }
        axes.push((tn, wn));
        let total = m.pow(n as u32);
        let mut y = vec![0.0; n];
        let mut sum = 0.0;
        for p in 0..total {
            let mut rest = p;
            let mut w = 1.0;
            for k in (0..n).rev() {
                let i = rest % m;
                rest /= m;
                y[k] = axes[k].0[i];
                w *= axes[k].1[i];
            }
            let v = f(&y)?;
            if v != 0.0 {
                sum += w * v * self.kernel(x, &y)?;
            }
        }
        Ok(sum)
    }

    /// Signed pyramid decomposition with apex `x`: the cell integral equals
    /// the sum over faces of `nu_F (c_F - x_k)` times the Duffy-mapped
    /// pyramid integral, whose Jacobian `s^{n-1}` cancels the kernel
    /// singularity.
    fn duffy_box(&self, x: &[f64], lo: &[f64], sz: &[f64], f: &dyn Fn(&[f64]) -> Result<f64>) -> Result<f64> {
        let n = lo.len();
        let b = self.cfg.b;
        let m = self.cell.order();
        let (ss, ws) = self.cell.mapped(0.0, 1.0);
        let mut sum = 0.0;
        let mut y = vec![0.0; n];
        let mut face = vec![0.0; n];
        for k in 0..n {
            let others: Vec<usize> = (0..n).filter(|&j| j != k).collect();
            let rules: Vec<(Vec<f64>, Vec<f64>)> = others
                .iter()
                .map(|&j| self.cell.mapped(lo[j], lo[j] + sz[j]))
                .collect();
            for side in 0..2 {
                let c = lo[k] + side as f64 * sz[k];
                let normal = if side == 1 { 1.0 } else { -1.0 };
                let factor = normal * (c - x[k]);
                if factor.abs() <= 1e-15 * sz[k] {
                    continue;
                }
                face[k] = c;
                let count = m.pow(others.len() as u32);
                for q in 0..count {
                    let mut rest = q;
                    let mut wf = factor;
                    for (r, &j) in others.iter().enumerate().rev() {
                        let i = rest % m;
                        rest /= m;
                        face[j] = rules[r].0[i];
                        wf *= rules[r].1[i];
                    }
                    for (s, w) in ss.iter().zip(&ws) {
                        for i in 0..n {
                            y[i] = x[i] + s * (face[i] - x[i]);
                        }
                        let v = f(&y)?;
                        if v == 0.0 || y[n - 1] <= 0.0 {
                            continue;
                        }
                        sum += wf * w * s.powi(n as i32 - 1) * y[n - 1].powf(b) * v * self.kernel(x, &y)?;
                    }
                }
            }
        }
        Ok(sum)
    }
}

/// `(|x-y|^2, |x-y*|^2)` with `y*` the reflection of `y` in `x_n = 0`.
fn distances(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len();
    let tang: f64 = (0..n - 1).map(|i| (x[i] - y[i]).powi(2)).sum();
    (tang + (x[n - 1] - y[n - 1]).powi(2), tang + (x[n - 1] + y[n - 1]).powi(2))
}

fn box_distance(x: &[f64], lo: &[f64], sz: &[f64]) -> f64 {
    x.iter()
        .zip(lo)
        .zip(sz)
        .map(|((v, l), s)| (l - v).max(v - (l + s)).max(0.0).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn cell_is_zero(g: &ScalarGrid, corner: &[usize]) -> bool {
    let n = corner.len();
    let mut idx = corner.to_vec();
    (0..(1usize << n)).all(|mask| {
        for k in 0..n {
            idx[k] = corner[k] + ((mask >> k) & 1);
        }
        g.get(&idx) == 0.0
    })
}

/// `mu_b` of the box `lo + [0, sz]`.
pub fn mu_b_box(lo: &[f64], sz: &[f64], b: f64) -> f64 {
    let n = lo.len();
    let footprint: f64 = sz[..n - 1].iter().product();
    let bot = lo[n - 1];
    let top = bot + sz[n - 1];
    footprint * (top.powf(b + 1.0) - bot.powf(b + 1.0)) / (b + 1.0)
}

/// A half-space field with weight exponent `b`. Node values drive the
/// weighted norms; quadrature uses `exact` when given and multilinear
/// interpolation of the nodes otherwise.
#[derive(Clone)]
pub struct WeightedField {
    pub grid: HalfGridFunction,
    pub b: f64,
    pub exact: Option<Source>,
}

impl std::fmt::Debug for WeightedField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WeightedField")
            .field("shape", &self.grid.grid.shape())
            .field("b", &self.b)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl WeightedField {
    pub fn new(grid: HalfGridFunction, b: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::InvalidParameter(format!("b = {b} must be positive")));
        }
        Ok(WeightedField { grid, b, exact: None })
    }

    /// Samples `f` on `[-r, r]^{n-1} x [0, r]` with spacing `h` and keeps
    /// `f` for quadrature.
    pub fn from_fn(n: usize, b: f64, r: f64, h: f64, f: Source) -> Result<Self> {
        let k = (r / h).round() as usize;
        let mut shape = vec![2 * k + 1; n];
        shape[n - 1] = k + 1;
        let mut origin = vec![-(k as f64) * h; n];
        origin[n - 1] = 0.0;
        let g = ScalarGrid::from_fn(shape, origin, vec![h; n], |x| f(x))?;
        let mut w = WeightedField::new(HalfGridFunction::new(g)?, b)?;
        w.exact = Some(f);
        Ok(w)
    }

    pub fn dim(&self) -> usize {
        self.grid.grid.dim()
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        let v = match &self.exact {
            Some(f) => f(y),
            None => self.grid.grid.sample_linear(y).unwrap_or(0.0),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("source at {y:?}")))
        }
    }

    /// Multiplies values and the exact evaluator by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        let g = self.grid.grid.map(|_, v| alpha * v)?;
        Ok(WeightedField {
            grid: HalfGridFunction::new(g)?,
            b: self.b,
            exact: self.exact.clone().map(|f| Arc::new(move |x: &[f64]| alpha * f(x)) as Source),
        })
    }
}

/// `(int |f|^p x_n^b dx)^{1/p}` with exact cell weights and the corner
/// average of `|f|^p` on each cell.
pub fn weighted_norm(f: &WeightedField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must be at least 1")));
    }
    let g = &f.grid.grid;
    let n = g.dim();
    let cells: Vec<usize> = g.shape().iter().map(|k| k - 1).collect();
    let total: usize = cells.iter().product();
    let sz = g.spacing();
    let mut sum = 0.0;
    let mut corner = vec![0usize; n];
    let mut idx = vec![0usize; n];
    let mut lo = vec![0.0; n];
    for c in 0..total {
        let mut rest = c;
        for k in (0..n).rev() {
            corner[k] = rest % cells[k];
            rest /= cells[k];
            lo[k] = g.coord(k, corner[k]);
        }
        let mut avg = 0.0;
        for mask in 0..(1usize << n) {
            for k in 0..n {
                idx[k] = corner[k] + ((mask >> k) & 1);
            }
            avg += g.get(&idx).abs().powf(p);
        }
        avg /= (1usize << n) as f64;
        sum += avg * mu_b_box(&lo, sz, f.b);
    }
    Ok(sum.powf(1.0 / p))
}

/// Centred residuals of `-Δu - b u_n/x_n - f` and the boundary Neumann
/// defect.
#[derive(Debug, Clone, PartialEq)]
pub struct KeldyshResidual {
    pub values: Vec<f64>,
    /// Largest `|u_n(x', 0)|`, when the grid contains `x_n = 0`.
    pub neumann_defect: Option<f64>,
}

pub fn keldysh_residual(
    u: &HalfGridFunction,
    f: &dyn Fn(&[f64]) -> f64,
    b: f64,
    points: &[Vec<f64>],
) -> Result<KeldyshResidual> {
    let g = &u.grid;
    let n = g.dim();
    let h = g.spacing();
    let values = points
        .iter()
        .map(|x| {
            if x.len() != n {
                return Err(Error::UnsupportedDimension(x.len()));
            }
            let idx: Vec<usize> = (0..n)
                .map(|k| {
                    let t = ((x[k] - g.origin()[k]) / h[k]).round();
                    if t < 1.0 || t as usize + 1 >= g.shape()[k] {
                        Err(Error::InvalidParameter(format!("stencil at {x:?} leaves the grid")))
                    } else {
                        Ok(t as usize)
                    }
                })
                .collect::<Result<_>>()?;
            let node = g.node(&idx);
            if node[n - 1] < 2.0 * h[n - 1] - 1e-12 {
                return Err(Error::OnBoundary(node[n - 1]));
            }
            let c = g.get(&idx);
            let mut lap = 0.0;
            let nb = |k: usize, s: isize| {
                let mut j = idx.clone();
                j[k] = (j[k] as isize + s) as usize;
                g.get(&j)
            };
            for k in 0..n {
                lap += (nb(k, 1) - 2.0 * c + nb(k, -1)) / (h[k] * h[k]);
            }
            let un = (nb(n - 1, 1) - nb(n - 1, -1)) / (2.0 * h[n - 1]);
            Ok(-lap - b * un / node[n - 1] - f(&node))
        })
        .collect::<Result<Vec<f64>>>()?;
    let neumann_defect = if u.includes_boundary() {
        Some(u.boundary_normal_derivative()?)
    } else {
        None
    };
    Ok(KeldyshResidual { values, neumann_defect })
}

/// Both sides of `|D^2 u|^2 + b |u_n/x_n|^2 = |f|^2` in `L^2(mu_b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_gap: f64,
}

/// Fourth-order central differences (with the even reflection across
/// `x_n = 0`), trapezoid weights in `x'`, and product Simpson weights
/// exact for quadratics times `x_n^b` in the normal direction. The two
/// outermost layers of nodes are dropped.
pub fn energy_identity_check(u: &HalfGridFunction, f: &dyn Fn(&[f64]) -> f64, b: f64) -> Result<EnergyIdentity> {
    if !u.includes_boundary() {
        return Err(Error::InvalidGrid("the grid must contain x_n = 0".into()));
    }
    let g = &u.grid;
    let n = g.dim();
    let shape = g.shape();
    let h = g.spacing();
    if shape[..n - 1].iter().any(|&k| k < 7) || shape[n - 1] < 5 {
        return Err(Error::TooFewNodes("energy check needs 7 tangential and 5 normal nodes".into()));
    }
    let strides: Vec<isize> = (0..n).map(|k| shape[k + 1..].iter().product::<usize>() as isize).collect();
    let v = g.values();
    let mut top = shape[n - 1] - 3;
    if top % 2 == 1 {
        top -= 1;
    }
    let wn = simpson_weights(h[n - 1], top, b);
    let tang_weight = |idx: &[usize]| -> f64 {
        (0..n - 1)
            .map(|k| if idx[k] == 2 || idx[k] == shape[k] - 3 { 0.5 * h[k] } else { h[k] })
            .product()
    };
    let d2 = [-1.0, 16.0, -30.0, 16.0, -1.0];
    let d1 = [1.0, -8.0, 0.0, 8.0, -1.0];
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut idx = vec![0usize; n];
    let tang_total: usize = (0..n - 1).map(|k| shape[k] - 4).product();
    for t in 0..tang_total {
        let mut rest = t;
        for k in (0..n - 1).rev() {
            idx[k] = 2 + rest % (shape[k] - 4);
            rest /= shape[k] - 4;
        }
        let wt = tang_weight(&idx);
        for kn in 0..=top {
            idx[n - 1] = kn;
            let base: isize = (0..n).map(|k| idx[k] as isize * strides[k]).sum();
            // offset along axis k by s, reflecting the normal index
            let at = |k: usize, s: isize, l: usize, r: isize| -> f64 {
                let mut off = base;
                for (ax, step) in [(k, s), (l, r)] {
                    if ax == n - 1 {
                        let j = (kn as isize + step).abs();
                        off += (j - kn as isize) * strides[ax];
                    } else {
                        off += step * strides[ax];
                    }
                }
                v[off as usize]
            };
            let mut frob = 0.0;
            for i in 0..n {
                let mut dii = 0.0;
                for (a, c) in d2.iter().enumerate() {
                    dii += c * at(i, a as isize - 2, i, 0);
                }
                dii /= 12.0 * h[i] * h[i];
                frob += dii * dii;
                for j in 0..i {
                    let mut dij = 0.0;
                    for (a, ca) in d1.iter().enumerate() {
                        if *ca == 0.0 {
                            continue;
                        }
                        for (c, cb) in d1.iter().enumerate() {
                            if *cb == 0.0 {
                                continue;
                            }
                            dij += ca * cb * at(i, a as isize - 2, j, c as isize - 2);
                        }
                    }
                    dij /= 144.0 * h[i] * h[j];
                    frob += 2.0 * dij * dij;
                }
            }
            let xn = g.coord(n - 1, kn);
            let ratio = if kn == 0 {
                let mut unn = 0.0;
                for (a, c) in d2.iter().enumerate() {
                    unn += c * at(n - 1, a as isize - 2, n - 1, 0);
                }
                unn / (12.0 * h[n - 1] * h[n - 1])
            } else {
                let mut un = 0.0;
                for (a, c) in d1.iter().enumerate() {
                    un += c * at(n - 1, a as isize - 2, n - 1, 0);
                }
                un / (12.0 * h[n - 1]) / xn
            };
            let w = wt * wn[kn];
            lhs += w * (frob + b * ratio * ratio);
            let node = g.node(&idx);
            rhs += w * f(&node).powi(2);
        }
    }
    if !(lhs.is_finite() && rhs.is_finite()) {
        return Err(Error::NonFinite("energy integrals".into()));
    }
    Ok(EnergyIdentity {
        lhs,
        rhs,
        rel_gap: (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE),
    })
}

/// Weights `w_k` on nodes `0..=top` (top even) with
/// `sum w_k q(x_k) = int_0^{top h} q(x) x^b dx` for piecewise quadratics.
fn simpson_weights(h: f64, top: usize, b: f64) -> Vec<f64> {
    let mut w = vec![0.0; top + 1];
    for p in (0..top).step_by(2) {
        let x0 = p as f64 * h;
        let (x1, x2) = (x0 + h, x0 + 2.0 * h);
        let m = |k: i32| (x2.powf(b + 1.0 + k as f64) - x0.powf(b + 1.0 + k as f64)) / (b + 1.0 + k as f64);
        let (m0, m1, m2) = (m(0), m(1), m(2));
        // Lagrange basis on (x0, x1, x2) integrated against the moments
        let lag = |xa: f64, xb: f64, xc: f64| (m2 - (xb + xc) * m1 + xb * xc * m0) / ((xa - xb) * (xa - xc));
        w[p] += lag(x0, x1, x2);
        w[p + 1] += lag(x1, x0, x2);
        w[p + 2] += lag(x2, x0, x1);
    }
    w
}

/// Samples `|T_b f|` at `t * direction` for every `t` in `radii`.
pub fn decay_samples(k: &Keldysh, f: &WeightedField, direction: &[f64], radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidParameter("zero direction".into()));
    }
    let points: Vec<Vec<f64>> = radii
        .iter()
        .map(|t| direction.iter().map(|d| t * d / norm).collect())
        .collect();
    let values = k.apply_many(f, &points)?;
    Ok(radii.iter().zip(values).map(|(t, v)| (*t, v.abs())).collect())
}

/// Log-log slope of `|T_b f|` against `|x|`; coefficients are
/// `[slope, prefactor]`.
pub fn decay_fit(samples: &[(f64, f64)], cfg: &KeldyshConfig) -> Result<FitResult> {
    if samples.len() < 3 {
        return Err(Error::TooFewNodes(format!("{} decay samples", samples.len())));
    }
    if samples.iter().any(|(r, v)| !(*r > 0.0 && *v > 0.0)) {
        return Err(Error::InvalidParameter("decay samples must be positive".into()));
    }
    let xs: Vec<f64> = samples.iter().map(|(r, _)| r.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|(_, v)| v.ln()).collect();
    let (slope, icpt, rms) = line_fit(&xs, &ys)?;
    let expected = -cfg.decay_exponent();
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    Ok(FitResult {
        kind: FitKind::Exponent,
        coefficients: vec![slope, icpt.exp()],
        residual: rms,
        window: (lo, hi),
        extras: vec![("expected".into(), expected), ("deviation".into(), slope - expected)],
    })
}

/// Outcome of lifting `u` to `n+1` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct RaiseReport {
    /// `u(x', sqrt(x_n^2 + x_{n+1}^2))` on `[x'-box] x [-R, R] x [0, R]`.
    pub raised: ScalarGrid,
    pub max_residual: f64,
    pub checked: usize,
    /// Largest centred `|ũ_{n+1}(x, 0)|`.
    pub neumann_defect: f64,
}

/// Lifts `u` by `ũ(x, x_{n+1}) = u(x', r)`, `r = sqrt(x_n^2 + x_{n+1}^2)`,
/// with six-point Lagrange interpolation in `r`, and checks
/// `Δũ + (b-1) ũ_{n+1} / x_{n+1} = g(x', r)` at interior nodes with
/// `x_{n+1} >= 2h`, where `g = Δu + b u_n / x_n`.
pub fn dimension_raise(u: &HalfGridFunction, g: &dyn Fn(&[f64]) -> f64, b: f64) -> Result<RaiseReport> {
    if !(b > 1.0) {
        return Err(Error::InvalidParameter(format!("b = {b} must exceed 1 for the raised equation")));
    }
    if !u.includes_boundary() {
        return Err(Error::InvalidGrid("the grid must contain x_n = 0".into()));
    }
    let ug = &u.grid;
    let n = ug.dim();
    if n + 1 > 4 {
        return Err(Error::UnsupportedDimension(n + 1));
    }
    let hn = ug.spacing()[n - 1];
    let kmax = ug.shape()[n - 1] - 1;
    let half = ((kmax as f64 - 3.0) / std::f64::consts::SQRT_2).floor() as usize;
    if half < 4 {
        return Err(Error::TooFewNodes("normal extent too short to raise".into()));
    }
    let mut shape = ug.shape()[..n - 1].to_vec();
    shape.push(2 * half + 1);
    shape.push(half + 1);
    let mut origin = ug.origin()[..n - 1].to_vec();
    origin.push(-(half as f64) * hn);
    origin.push(0.0);
    let mut spacing = ug.spacing()[..n - 1].to_vec();
    spacing.push(hn);
    spacing.push(hn);
    let slice = ug.shape()[n - 1];
    let radial = |tang_flat: usize, r: f64| -> f64 {
        let vals = &ug.values()[tang_flat * slice..(tang_flat + 1) * slice];
        lagrange6(vals, r / hn)
    };
    let tang_total: usize = ug.shape()[..n - 1].iter().product();
    let block = (2 * half + 1) * (half + 1);
    let mut values = vec![0.0; tang_total * block];
    for t in 0..tang_total {
        for i in 0..=2 * half {
            let xn = (i as f64 - half as f64) * hn;
            for j in 0..=half {
                let xm = j as f64 * hn;
                values[t * block + i * (half + 1) + j] = radial(t, (xn * xn + xm * xm).sqrt());
            }
        }
    }
    let raised = ScalarGrid::new(shape.clone(), origin, spacing, values)?;
    let d = n + 1;
    let mut max_residual = 0.0f64;
    let mut checked = 0usize;
    for flat in 0..raised.len() {
        let idx = raised.multi_index(flat);
        let interior = (0..d).all(|k| idx[k] + 2 < shape[k] && (k == d - 1 || idx[k] >= 2));
        if !interior || idx[d - 1] < 2 {
            continue;
        }
        let lhs = raised_operator_at(&raised, b, &idx);
        let x = raised.node(&idx);
        let r = (x[n - 1].powi(2) + x[n].powi(2)).sqrt();
        let mut p = x[..n - 1].to_vec();
        p.push(r);
        max_residual = max_residual.max((lhs - g(&p)).abs());
        checked += 1;
    }
    let mut neumann_defect = 0.0f64;
    for t in 0..tang_total {
        for i in 0..=2 * half {
            let xn = (i as f64 - half as f64) * hn;
            let r = (xn * xn + hn * hn).sqrt();
            // the lift at x_{n+1} = +h and -h shares the same radius
            let up = radial(t, r);
            let down = radial(t, (xn * xn + (-hn) * (-hn)).sqrt());
            neumann_defect = neumann_defect.max(((up - down) / (2.0 * hn)).abs());
        }
    }
    Ok(RaiseReport {
        raised,
        max_residual,
        checked,
        neumann_defect,
    })
}

/// Fourth-order central `Δũ + (b-1) ũ_{n+1} / x_{n+1}` at a node at least
/// two steps inside the tangential edges, reflecting evenly across
/// `x_{n+1} = 0`.
pub fn raised_operator_at(raised: &ScalarGrid, b: f64, idx: &[usize]) -> f64 {
    let d = raised.dim();
    let h = raised.spacing();
    let nb = |k: usize, s: isize| {
        let mut j = idx.to_vec();
        j[k] = (j[k] as isize + s).unsigned_abs();
        raised.get(&j)
    };
    let mut lap = 0.0;
    for k in 0..d {
        lap += (-nb(k, 2) + 16.0 * nb(k, 1) - 30.0 * nb(k, 0) + 16.0 * nb(k, -1) - nb(k, -2)) / (12.0 * h[k] * h[k]);
    }
    let xm = raised.coord(d - 1, idx[d - 1]);
    let dm = (-nb(d - 1, 2) + 8.0 * nb(d - 1, 1) - 8.0 * nb(d - 1, -1) + nb(d - 1, -2)) / (12.0 * h[d - 1]);
    lap + (b - 1.0) * dm / xm
}

/// Six-point Lagrange interpolation at fractional index `t` of samples on
/// `x_n >= 0`, extended evenly to negative indices.
fn lagrange6(vals: &[f64], t: f64) -> f64 {
    let len = vals.len() as isize;
    let base = (t.floor() as isize).clamp(0, len - 4) - 2;
    let at = |i: isize| vals[i.unsigned_abs().min(len as usize - 1)];
    let mut sum = 0.0;
    for a in 0..6 {
        let ia = base + a;
        let mut w = 1.0;
        for c in 0..6 {
            if c != a {
                let ic = base + c;
                w *= (t - ic as f64) / (ia - ic) as f64;
            }
        }
        sum += w * at(ia);
    }
    sum
}

/// The Gaussian pair `u = exp(-|x|^2)`, `f = (2n + 2b - 4|x|^2) exp(-|x|^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPair {
    pub n: usize,
    pub b: f64,
}

impl GaussianPair {
    pub fn u(&self, x: &[f64]) -> f64 {
        (-x.iter().map(|v| v * v).sum::<f64>()).exp()
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (2.0 * self.n as f64 + 2.0 * self.b - 4.0 * r2) * (-r2).exp()
    }

    /// `f` with values below `1e-14` in magnitude set to zero.
    pub fn source(&self) -> Source {
        let me = *self;
        Arc::new(move |x: &[f64]| {
            let v = me.f(x);
            if v.abs() < 1e-14 {
                0.0
            } else {
                v
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
        let p = |rng: &mut ChaCha8Rng| {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            v[n - 1] = rng.gen_range(0.01..2.0);
            v
        };
        (p(rng), p(rng))
    }

    #[test]
    fn normalising_constant() {
        let cfg = KeldyshConfig::new(3, 5.0 / 3.0).unwrap();
        assert!((cfg.d_b() - 0.1128).abs() < 1e-3, "{}", cfg.d_b());
    }

    #[test]
    fn kernel_is_symmetric_and_positive() {
        let k = Keldysh::new(KeldyshConfig::new(3, 5.0 / 3.0).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let (x, y) = random_pair(&mut rng, 3);
            let a = k.kernel(&x, &y).unwrap();
            let b = k.kernel(&y, &x).unwrap();
            assert!(a > 0.0);
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
        assert_eq!(k.kernel(&[0.1, 0.2, 0.3], &[0.1, 0.2, 0.3]).unwrap_err().token(), "diagonal");
        assert!(KeldyshConfig::new(3, 0.0).is_err());
    }

    #[test]
    fn kernel_matches_closed_form_for_b_two() {
        // b = 2 removes the tau weight and the integral is elementary
        let cfg = KeldyshConfig::new(3, 2.0).unwrap();
        let k = Keldysh::new(cfg.clone()).unwrap();
        let p = 1.5;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for i in 0..200 {
            let (x, mut y) = random_pair(&mut rng, 3);
            if i % 2 == 0 {
                // near-diagonal pairs exercise the graded panels
                let eps = 10f64.powi(-(i % 7) - 1);
                y = x.iter().map(|v| v + eps * 0.3).collect();
            }
            let (a, bb) = distances(&x, &y);
            let exact = cfg.d_b() * (bb.powf(1.0 - p) - a.powf(1.0 - p)) / ((1.0 - p) * (bb - a));
            let got = k.kernel(&x, &y).unwrap();
            assert!((got - exact).abs() <= 1e-11 * exact, "{got} vs {exact}");
        }
    }

    #[test]
    fn doubling_the_order_is_stable() {
        let b = 5.0 / 3.0;
        let k = Keldysh::new(KeldyshConfig::new(3, b).unwrap()).unwrap();
        let mut cfg = KeldyshConfig::new(3, b).unwrap();
        cfg.tau_order = 64;
        let k2 = Keldysh::new(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let (x, y) = random_pair(&mut rng, 3);
            let (a, bb) = distances(&x, &y);
            if a / bb < GRADED_RATIO {
                continue;
            }
            let (u, v) = (k.kernel(&x, &y).unwrap(), k2.kernel(&x, &y).unwrap());
            assert!((u - v).abs() <= 1e-10 * u);
        }
    }

    #[test]
    fn weighted_norm_of_unit_cube() {
        let b = 1.5;
        for n in [2, 3] {
            let g = ScalarGrid::from_fn(vec![5; n], vec![0.0; n], vec![0.25; n], |_| 1.0).unwrap();
            let f = WeightedField::new(HalfGridFunction::new(g).unwrap(), b).unwrap();
            let v = weighted_norm(&f, 2.0).unwrap();
            assert!((v - (1.0 / (b + 1.0)).sqrt()).abs() < 1e-9);
            let s = weighted_norm(&f.scaled(-3.0).unwrap(), 2.0).unwrap();
            assert!((s - 3.0 * v).abs() < 1e-14);
        }
    }

    #[test]
    fn simpson_weights_are_exact_on_quadratics() {
        let b = 5.0 / 3.0;
        let w = simpson_weights(0.1, 10, b);
        let q = |x: f64| 1.0 - 2.0 * x + 3.0 * x * x;
        let got: f64 = w.iter().enumerate().map(|(k, w)| w * q(k as f64 * 0.1)).sum();
        let exact = 1.0 / (b + 1.0) - 2.0 / (b + 2.0) + 3.0 / (b + 3.0);
        assert!((got - exact).abs() < 1e-13);
    }

    #[test]
    fn barrier_and_constants_have_zero_residual() {
        let b = 5.0 / 3.0;
        let g = ScalarGrid::from_fn(vec![9, 41], vec![-1.0, 0.5], vec![0.25, 0.025], |x| x[1].powf(1.0 - b)).unwrap();
        let u = HalfGridFunction::new(g).unwrap();
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![0.0, 0.6 + 0.1 * i as f64]).collect();
        let r = keldysh_residual(&u, &|_| 0.0, b, &pts).unwrap();
        assert!(r.values.iter().all(|v| v.abs() < 5e-3), "{:?}", r.values);
        assert!(r.neumann_defect.is_none());
        let one = ScalarGrid::from_fn(vec![9, 9], vec![-1.0, 0.0], vec![0.25, 0.25], |_| 1.0).unwrap();
        let one = HalfGridFunction::new(one).unwrap();
        let r = keldysh_residual(&one, &|_| 0.0, b, &[vec![0.0, 1.0]]).unwrap();
        assert_eq!(r.values[0], 0.0);
        assert_eq!(r.neumann_defect, Some(0.0));
    }

    #[test]
    fn lagrange_is_exact_on_quintics_and_even() {
        let vals: Vec<f64> = (0..20).map(|i| (i as f64).powi(4) - 3.0 * (i as f64).powi(2)).collect();
        for t in [0.3f64, 2.7, 9.5, 17.2] {
            let exact = t.powi(4) - 3.0 * t * t;
            assert!((lagrange6(&vals, t) - exact).abs() < 1e-8 * (1.0 + exact.abs()));
        }
    }
}
