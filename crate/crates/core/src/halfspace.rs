//! Closed-form solutions of singular Monge-Ampere equations on the upper
//! half-space, their residual evaluators, and the partial Legendre
//! transform in the tangential variables.
//!
//! Points are `x = (x', x_n)` with `x_n` the last coordinate.

use nalgebra::DMatrix;

use crate::convex::legendre_transform;
use crate::error::{Error, Result};
use crate::grid::{AxisBox, ScalarGrid};

/// Anything with a gradient and Hessian at interior points.
pub trait SecondOrder {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSolution {
    /// `x^2/2 + |y|^{1+eps} / ((1+eps) eps)` in the plane.
    Example31 { eps: f64 },
    /// `|x''|^2/2 + x_1^2 x_n^{b-1}/2 + x_n^{3-b} / (2(3-b))`, where `x''`
    /// collects `x_2 .. x_{n-1}`.
    Example33 { n: usize, b: f64 },
    /// Partial conjugate of [`ModelSolution::Example33`]:
    /// `y_1^2 y_n^{1-b}/2 + |y''|^2/2 - y_n^{3-b} / (2(3-b))`.
    Example33Conjugate { n: usize, b: f64 },
    /// `|x|^2 / 2`.
    JwRadial { n: usize },
    /// `|x'|^2 / 2`.
    JwFlat { n: usize },
    /// `x_1^2 / (2(1+x_n)) + (x_2^2 + .. + x_n^2)/2 + x_n^3/6`.
    Savin { n: usize },
    /// `sum c_ij x_i x_j / 2 + c_nn x_n^2 / 2` with `c` the tangential block.
    Quadratic { c: Vec<Vec<f64>>, cnn: f64 },
}

/// Names accepted by [`ModelSolution::by_name`].
pub const MODEL_NAMES: [&str; 7] = [
    "example31",
    "example33",
    "example33-conjugate",
    "jw_radial",
    "jw_flat",
    "savin",
    "quadratic",
];

impl ModelSolution {
    /// Registry lookup. `n` and `b` are ignored by models that do not use
    /// them; `example31` reads `eps` from `b`. `quadratic` is the
    /// normalised `(1+b) c_nn det(c') = 1` with `c' = I`.
    pub fn by_name(name: &str, n: usize, b: f64) -> Result<Self> {
        let m = match name {
            "example31" => ModelSolution::Example31 { eps: b },
            "example33" => ModelSolution::Example33 { n, b },
            "example33-conjugate" => ModelSolution::Example33Conjugate { n, b },
            "jw_radial" => ModelSolution::JwRadial { n },
            "jw_flat" => ModelSolution::JwFlat { n },
            "savin" => ModelSolution::Savin { n },
            "quadratic" => ModelSolution::normalized_quadratic(n, b)?,
            other => return Err(Error::InvalidParameter(format!("unknown model `{other}`"))),
        };
        m.validate()?;
        Ok(m)
    }

    /// Identity tangential block with `c_nn = 1 / (1 + b)`.
    pub fn normalized_quadratic(n: usize, b: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::UnsupportedDimension(n));
        }
        let c = (0..n - 1)
            .map(|i| (0..n - 1).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Ok(ModelSolution::Quadratic {
            c,
            cnn: 1.0 / (1.0 + b),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSolution::Example31 { .. } => "example31",
            ModelSolution::Example33 { .. } => "example33",
            ModelSolution::Example33Conjugate { .. } => "example33-conjugate",
            ModelSolution::JwRadial { .. } => "jw_radial",
            ModelSolution::JwFlat { .. } => "jw_flat",
            ModelSolution::Savin { .. } => "savin",
            ModelSolution::Quadratic { .. } => "quadratic",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ModelSolution::Example31 { eps } if !(*eps > 0.0 && *eps < 1.0) => {
                Err(Error::InvalidParameter(format!("eps = {eps} outside (0, 1)")))
            }
            ModelSolution::Example33 { n, b } | ModelSolution::Example33Conjugate { n, b } => {
                if *n < 2 {
                    Err(Error::UnsupportedDimension(*n))
                } else if (b - 3.0).abs() < 1e-6 {
                    Err(Error::InvalidParameter("b = 3 makes the x_n^{3-b} term degenerate".into()))
                } else if *b <= 1.0 {
                    Err(Error::InvalidParameter(format!("b = {b} must exceed 1")))
                } else {
                    Ok(())
                }
            }
            ModelSolution::JwRadial { n } | ModelSolution::JwFlat { n } | ModelSolution::Savin { n }
                if *n < 2 =>
            {
                Err(Error::UnsupportedDimension(*n))
            }
            ModelSolution::Quadratic { c, .. } if c.iter().any(|r| r.len() != c.len()) => {
                Err(Error::InvalidParameter("tangential block must be square".into()))
            }
            _ => Ok(()),
        }
    }

    fn n(&self) -> usize {
        match self {
            ModelSolution::Example31 { .. } => 2,
            ModelSolution::Example33 { n, .. }
            | ModelSolution::Example33Conjugate { n, .. }
            | ModelSolution::JwRadial { n }
            | ModelSolution::JwFlat { n }
            | ModelSolution::Savin { n } => *n,
            ModelSolution::Quadratic { c, .. } => c.len() + 1,
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::InvalidParameter(format!(
                "point of length {} for a model in R^{}",
                x.len(),
                self.n()
            )));
        }
        let last = x[x.len() - 1];
        let needs_positive = matches!(
            self,
            ModelSolution::Example33 { .. } | ModelSolution::Example33Conjugate { .. }
        );
        if needs_positive && last <= 0.0 {
            return Err(Error::OnBoundary(last));
        }
        if let ModelSolution::Example31 { .. } = self {
            if x[1] == 0.0 {
                return Err(Error::OnBoundary(0.0));
            }
        }
        Ok(())
    }
}

impl SecondOrder for ModelSolution {
    fn dim(&self) -> usize {
        self.n()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let n = x.len();
        let xn = x[n - 1];
        let mid = |x: &[f64]| x[1..n - 1].iter().map(|v| v * v).sum::<f64>();
        Ok(match self {
            ModelSolution::Example31 { eps } => {
                0.5 * x[0] * x[0] + x[1].abs().powf(1.0 + eps) / ((1.0 + eps) * eps)
            }
            ModelSolution::Example33 { b, .. } => {
                0.5 * mid(x) + 0.5 * x[0] * x[0] * xn.powf(b - 1.0) + xn.powf(3.0 - b) / (2.0 * (3.0 - b))
            }
            ModelSolution::Example33Conjugate { b, .. } => {
                0.5 * x[0] * x[0] * xn.powf(1.0 - b) + 0.5 * mid(x) - xn.powf(3.0 - b) / (2.0 * (3.0 - b))
            }
            ModelSolution::JwRadial { .. } => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            ModelSolution::JwFlat { .. } => 0.5 * x[..n - 1].iter().map(|v| v * v).sum::<f64>(),
            ModelSolution::Savin { .. } => {
                x[0] * x[0] / (2.0 * (1.0 + xn)) + 0.5 * x[1..].iter().map(|v| v * v).sum::<f64>() + xn.powi(3) / 6.0
            }
            ModelSolution::Quadratic { c, cnn } => {
                let mut q = 0.0;
                for i in 0..n - 1 {
                    for j in 0..n - 1 {
                        q += c[i][j] * x[i] * x[j];
                    }
                }
                0.5 * q + 0.5 * cnn * xn * xn
            }
        })
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let n = x.len();
        let xn = x[n - 1];
        let mut g = vec![0.0; n];
        match self {
            ModelSolution::Example31 { eps } => {
                g[0] = x[0];
                g[1] = x[1].signum() * x[1].abs().powf(*eps) / eps;
            }
            ModelSolution::Example33 { b, .. } => {
                g[1..n - 1].copy_from_slice(&x[1..n - 1]);
                g[0] = x[0] * xn.powf(b - 1.0);
                g[n - 1] = 0.5 * (b - 1.0) * x[0] * x[0] * xn.powf(b - 2.0) + 0.5 * xn.powf(2.0 - b);
            }
            ModelSolution::Example33Conjugate { b, .. } => {
                g[1..n - 1].copy_from_slice(&x[1..n - 1]);
                g[0] = x[0] * xn.powf(1.0 - b);
                g[n - 1] = 0.5 * (1.0 - b) * x[0] * x[0] * xn.powf(-b) - 0.5 * xn.powf(2.0 - b);
            }
            ModelSolution::JwRadial { .. } => g.copy_from_slice(x),
            ModelSolution::JwFlat { .. } => g[..n - 1].copy_from_slice(&x[..n - 1]),
            ModelSolution::Savin { .. } => {
                g[1..].copy_from_slice(&x[1..]);
                g[0] = x[0] / (1.0 + xn);
                g[n - 1] = -x[0] * x[0] / (2.0 * (1.0 + xn).powi(2)) + xn + 0.5 * xn * xn;
            }
            ModelSolution::Quadratic { c, cnn } => {
                for i in 0..n - 1 {
                    g[i] = (0..n - 1).map(|j| c[i][j] * x[j]).sum();
                }
                g[n - 1] = cnn * xn;
            }
        }
        Ok(g)
    }

    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x)?;
        let n = x.len();
        let xn = x[n - 1];
        let l = n - 1;
        let mut h = DMatrix::<f64>::zeros(n, n);
        match self {
            ModelSolution::Example31 { eps } => {
                h[(0, 0)] = 1.0;
                h[(1, 1)] = x[1].abs().powf(eps - 1.0);
            }
            ModelSolution::Example33 { b, .. } => {
                for i in 1..l {
                    h[(i, i)] = 1.0;
                }
                h[(0, 0)] = xn.powf(b - 1.0);
                h[(0, l)] = (b - 1.0) * x[0] * xn.powf(b - 2.0);
                h[(l, 0)] = h[(0, l)];
                h[(l, l)] = 0.5 * (b - 1.0) * (b - 2.0) * x[0] * x[0] * xn.powf(b - 3.0)
                    + 0.5 * (2.0 - b) * xn.powf(1.0 - b);
            }
            ModelSolution::Example33Conjugate { b, .. } => {
                for i in 1..l {
                    h[(i, i)] = 1.0;
                }
                h[(0, 0)] = xn.powf(1.0 - b);
                h[(0, l)] = (1.0 - b) * x[0] * xn.powf(-b);
                h[(l, 0)] = h[(0, l)];
                h[(l, l)] = -0.5 * b * (1.0 - b) * x[0] * x[0] * xn.powf(-b - 1.0)
                    - 0.5 * (2.0 - b) * xn.powf(1.0 - b);
            }
            ModelSolution::JwRadial { .. } => h.fill_with_identity(),
            ModelSolution::JwFlat { .. } => {
                for i in 0..l {
                    h[(i, i)] = 1.0;
                }
            }
            ModelSolution::Savin { .. } => {
                for i in 1..n {
                    h[(i, i)] = 1.0;
                }
                let p = 1.0 + xn;
                h[(0, 0)] = 1.0 / p;
                h[(0, l)] = -x[0] / (p * p);
                h[(l, 0)] = h[(0, l)];
                h[(l, l)] = x[0] * x[0] / p.powi(3) + 1.0 + xn;
            }
            ModelSolution::Quadratic { c, cnn } => {
                for i in 0..l {
                    for j in 0..l {
                        h[(i, j)] = c[i][j];
                    }
                }
                h[(l, l)] = *cnn;
            }
        }
        Ok(h)
    }
}

/// Finite-difference derivatives of a value evaluator with step `h`.
pub struct FiniteDifference<'a, M: SecondOrder> {
    pub inner: &'a M,
    pub h: f64,
}

impl<M: SecondOrder> SecondOrder for FiniteDifference<'_, M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.inner.value(x)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = x.to_vec();
        (0..x.len())
            .map(|i| {
                y[i] = x[i] + self.h;
                let p = self.inner.value(&y)?;
                y[i] = x[i] - self.h;
                let m = self.inner.value(&y)?;
                y[i] = x[i];
                Ok((p - m) / (2.0 * self.h))
            })
            .collect()
    }

    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = x.len();
        let h = self.h;
        let mut y = x.to_vec();
        let mut f = |d: &[(usize, f64)]| -> Result<f64> {
            y.copy_from_slice(x);
            for &(i, s) in d {
                y[i] += s * h;
            }
            self.inner.value(&y)
        };
        let c = f(&[])?;
        let mut out = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = (f(&[(i, 1.0)])? - 2.0 * c + f(&[(i, -1.0)])?) / (h * h);
            for j in 0..i {
                let v = (f(&[(i, 1.0), (j, 1.0)])? - f(&[(i, 1.0), (j, -1.0)])? - f(&[(i, -1.0), (j, 1.0)])?
                    + f(&[(i, -1.0), (j, -1.0)])?)
                    / (4.0 * h * h);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(out)
    }
}

fn on_half_space(x: &[f64]) -> Result<f64> {
    let xn = *x.last().ok_or_else(|| Error::InvalidParameter("empty point".into()))?;
    if xn <= 0.0 {
        return Err(Error::OnBoundary(xn));
    }
    Ok(xn)
}

/// `det M - 1` where `M` is the Hessian with its normal-normal entry
/// replaced by `psi_nn + b psi_n / x_n`.
pub fn blow1_residual(m: &impl SecondOrder, b: f64, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    if b <= -1.0 {
        return Err(Error::InvalidParameter(format!("b = {b} must exceed -1")));
    }
    points
        .iter()
        .map(|x| {
            let xn = on_half_space(x)?;
            let n = x.len();
            let mut h = m.hessian(x)?;
            let g = m.gradient(x)?;
            h[(n - 1, n - 1)] += b * g[n - 1] / xn;
            Ok(h.determinant() - 1.0)
        })
        .collect()
}

/// `psi*_nn + b psi*_n / y_n + det D^2_{y'} psi*`.
pub fn pde002_residual(m: &impl SecondOrder, b: f64, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|y| {
            let yn = on_half_space(y)?;
            let n = y.len();
            let h = m.hessian(y)?;
            let g = m.gradient(y)?;
            let tang = h.view((0, 0), (n - 1, n - 1)).determinant();
            Ok(h[(n - 1, n - 1)] + b * g[n - 1] / yn + tang)
        })
        .collect()
}

/// `det D^2 u - (u_n / x_n)^{n+2}`.
pub fn ma31_residual(m: &impl SecondOrder, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|x| {
            let xn = on_half_space(x)?;
            let n = x.len();
            let g = m.gradient(x)?;
            Ok(m.hessian(x)?.determinant() - (g[n - 1] / xn).powi(n as i32 + 2))
        })
        .collect()
}

/// `det D^2 u - 1`.
pub fn ma41_residual(m: &impl SecondOrder, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|x| {
            on_half_space(x)?;
            Ok(m.hessian(x)?.determinant() - 1.0)
        })
        .collect()
}

/// `(u_xx - 1 + |y|^{1-eps}) u_yy - u_xy^2 - 1` in the plane.
pub fn r31_residual(m: &impl SecondOrder, eps: f64, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|p| {
            if p.len() != 2 {
                return Err(Error::UnsupportedDimension(p.len()));
            }
            if p[1] == 0.0 {
                return Err(Error::OnBoundary(0.0));
            }
            let h = m.hessian(p)?;
            Ok((h[(0, 0)] - 1.0 + p[1].abs().powf(1.0 - eps)) * h[(1, 1)] - h[(0, 1)].powi(2) - 1.0)
        })
        .collect()
}

/// A grid function on `{x_n >= x_n^0}` with `x_n` the last axis.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfGridFunction {
    pub grid: ScalarGrid,
}

impl HalfGridFunction {
    pub fn new(grid: ScalarGrid) -> Result<Self> {
        let d = grid.dim();
        if d < 2 {
            return Err(Error::UnsupportedDimension(d));
        }
        if grid.origin()[d - 1] < -1e-12 * grid.spacing()[d - 1] {
            return Err(Error::InvalidGrid("x_n axis must start at or above 0".into()));
        }
        Ok(HalfGridFunction { grid })
    }

    /// Samples `m` on a tangential box times `[xn_lo, xn_hi]`.
    pub fn sample(m: &impl SecondOrder, tangential: &AxisBox, xn: (f64, f64), shape: &[usize]) -> Result<Self> {
        let mut lo = tangential.lo.clone();
        let mut hi = tangential.hi.clone();
        lo.push(xn.0);
        hi.push(xn.1);
        let bx = AxisBox::new(lo, hi)?;
        let err = std::cell::RefCell::new(None);
        let g = ScalarGrid::over_box(&bx, shape, |x| match m.value(x) {
            Ok(v) => v,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                0.0
            }
        })?;
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        HalfGridFunction::new(g)
    }

    pub fn includes_boundary(&self) -> bool {
        self.grid.origin()[self.grid.dim() - 1].abs() <= 1e-12 * self.grid.spacing()[self.grid.dim() - 1]
    }

    fn slice_len(&self) -> usize {
        let d = self.grid.dim();
        self.grid.shape()[..d - 1].iter().product()
    }

    /// Values with `x_n` fixed at node `k`, as an `(n-1)`-dimensional grid.
    pub fn slice(&self, k: usize) -> Result<ScalarGrid> {
        let d = self.grid.dim();
        let shape = self.grid.shape();
        let m = self.slice_len();
        let nn = shape[d - 1];
        let vals = (0..m).map(|i| self.grid.values()[i * nn + k]).collect();
        ScalarGrid::new(
            shape[..d - 1].to_vec(),
            self.grid.origin()[..d - 1].to_vec(),
            self.grid.spacing()[..d - 1].to_vec(),
            vals,
        )
    }

    /// One-sided second-order normal derivative on the boundary slice,
    /// `(-3 f_0 + 4 f_1 - f_2) / (2 h)`, largest magnitude over the slice.
    pub fn boundary_normal_derivative(&self) -> Result<f64> {
        if !self.includes_boundary() {
            return Err(Error::InvalidGrid("grid does not contain x_n = 0".into()));
        }
        let d = self.grid.dim();
        let nn = self.grid.shape()[d - 1];
        if nn < 3 {
            return Err(Error::TooFewNodes("three x_n nodes needed".into()));
        }
        let h = self.grid.spacing()[d - 1];
        let v = self.grid.values();
        Ok((0..self.slice_len())
            .map(|i| ((-3.0 * v[i * nn] + 4.0 * v[i * nn + 1] - v[i * nn + 2]) / (2.0 * h)).abs())
            .fold(0.0, f64::max))
    }

    fn node_index(&self, x: &[f64]) -> Result<Vec<usize>> {
        let g = &self.grid;
        (0..g.dim())
            .map(|k| {
                let t = ((x[k] - g.origin()[k]) / g.spacing()[k]).round();
                if t < 1.0 || t as usize + 1 >= g.shape()[k] {
                    Err(Error::InvalidParameter(format!("stencil at {x:?} leaves the grid")))
                } else {
                    Ok(t as usize)
                }
            })
            .collect()
    }

    fn shifted(&self, idx: &[usize], d: &[(usize, isize)]) -> f64 {
        let mut j = idx.to_vec();
        for &(k, s) in d {
            j[k] = (j[k] as isize + s) as usize;
        }
        self.grid.get(&j)
    }
}

/// Centred differences at the grid node nearest to each point.
impl SecondOrder for HalfGridFunction {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.grid
            .sample_linear(x)
            .ok_or_else(|| Error::InvalidParameter(format!("{x:?} outside the grid")))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let idx = self.node_index(x)?;
        Ok((0..self.dim())
            .map(|k| {
                (self.shifted(&idx, &[(k, 1)]) - self.shifted(&idx, &[(k, -1)])) / (2.0 * self.grid.spacing()[k])
            })
            .collect())
    }

    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let idx = self.node_index(x)?;
        let n = self.dim();
        let h = self.grid.spacing();
        let c = self.grid.get(&idx);
        let mut out = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = (self.shifted(&idx, &[(i, 1)]) - 2.0 * c + self.shifted(&idx, &[(i, -1)])) / (h[i] * h[i]);
            for j in 0..i {
                let v = (self.shifted(&idx, &[(i, 1), (j, 1)]) - self.shifted(&idx, &[(i, 1), (j, -1)])
                    - self.shifted(&idx, &[(i, -1), (j, 1)])
                    + self.shifted(&idx, &[(i, -1), (j, -1)]))
                    / (4.0 * h[i] * h[j]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(out)
    }
}

/// Gradient range common to every slice: per tangential axis, the
/// intersection over slices of `[min, max]` of the difference quotients,
/// shrunk by `margin` on each side.
pub fn common_gradient_box(psi: &HalfGridFunction, margin: f64) -> Result<AxisBox> {
    let d = psi.grid.dim();
    let nn = psi.grid.shape()[d - 1];
    let mut lo = vec![f64::NEG_INFINITY; d - 1];
    let mut hi = vec![f64::INFINITY; d - 1];
    for k in 0..nn {
        let s = crate::convex::axis_slopes(&psi.slice(k)?);
        for a in 0..d - 1 {
            lo[a] = lo[a].max(s[a].0);
            hi[a] = hi[a].min(s[a].1);
        }
    }
    let width: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| margin * (h - l)).collect();
    let lo = lo.iter().zip(&width).map(|(l, w)| l + w).collect();
    let hi = hi.iter().zip(&width).map(|(h, w)| h - w).collect();
    AxisBox::new(lo, hi)
}

/// Conjugates every `x_n` slice in `x'` onto the dual box, keeping `y_n = x_n`.
/// The dual grid has the primal tangential shape unless `dual_shape` is given.
pub fn partial_legendre(
    psi: &HalfGridFunction,
    dual_box: &AxisBox,
    dual_shape: Option<&[usize]>,
) -> Result<HalfGridFunction> {
    let d = psi.grid.dim();
    if dual_box.dim() != d - 1 {
        return Err(Error::EmptyBox("dual box must cover the tangential variables".into()));
    }
    let nn = psi.grid.shape()[d - 1];
    let shape: Vec<usize> = dual_shape.map_or_else(|| psi.grid.shape()[..d - 1].to_vec(), |s| s.to_vec());
    let m: usize = shape.iter().product();
    let mut out = vec![0.0; m * nn];
    for k in 0..nn {
        let slice = psi.slice(k)?;
        if !strictly_convex(&slice) {
            return Err(Error::SliceNotConvex(psi.grid.coord(d - 1, k)));
        }
        let conj = legendre_transform(&slice, dual_box, &shape)?;
        for (i, v) in conj.values().iter().enumerate() {
            out[i * nn + k] = *v;
        }
    }
    let mut origin = dual_box.lo.clone();
    origin.push(psi.grid.origin()[d - 1]);
    let mut spacing: Vec<f64> = (0..d - 1)
        .map(|a| (dual_box.hi[a] - dual_box.lo[a]) / (shape[a] - 1) as f64)
        .collect();
    spacing.push(psi.grid.spacing()[d - 1]);
    let mut full_shape = shape;
    full_shape.push(nn);
    HalfGridFunction::new(ScalarGrid::new(full_shape, origin, spacing, out)?)
}

/// Every axis-aligned second difference strictly positive.
fn strictly_convex(g: &ScalarGrid) -> bool {
    let d = g.dim();
    let strides: Vec<usize> = (0..d).map(|k| g.shape()[k + 1..].iter().product()).collect();
    let v = g.values();
    (0..g.len()).all(|flat| {
        let idx = g.multi_index(flat);
        (0..d).all(|k| {
            if idx[k] == 0 || idx[k] + 1 >= g.shape()[k] {
                return true;
            }
            v[flat + strides[k]] + v[flat - strides[k]] - 2.0 * v[flat] > 0.0
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                x[n - 1] = rng.gen_range(0.1..1.5);
                x
            })
            .collect()
    }

    #[test]
    fn example33_solves_blow1() {
        let m = ModelSolution::Example33 { n: 3, b: 1.5 };
        let r = blow1_residual(&m, 1.5, &[vec![0.3, 0.2, 0.4]]).unwrap();
        assert!(r[0].abs() < 1e-10);
        for n in [2, 3, 4] {
            for b in [1.2, 1.5, (n as f64 + 2.0) / n as f64] {
                let m = ModelSolution::Example33 { n, b };
                for r in blow1_residual(&m, b, &random_points(n, 100, 1)).unwrap() {
                    assert!(r.abs() < 1e-10, "n {n} b {b}: {r}");
                }
            }
        }
    }

    #[test]
    fn example33_by_finite_differences() {
        let m = ModelSolution::Example33 { n: 3, b: 1.5 };
        let fd = FiniteDifference { inner: &m, h: 1e-3 };
        let r = blow1_residual(&fd, 1.5, &[vec![0.3, 0.2, 0.4]]).unwrap();
        assert!(r[0].abs() < 1e-5, "{}", r[0]);
    }

    #[test]
    fn conjugate_solves_002() {
        for n in [2, 3] {
            let m = ModelSolution::Example33Conjugate { n, b: 1.5 };
            for r in pde002_residual(&m, 1.5, &random_points(n, 100, 2)).unwrap() {
                assert!(r.abs() < 1e-10);
            }
        }
        // negative control: |y'|^2/2 - y_n^2/2 leaves -b
        let q = ModelSolution::Quadratic {
            c: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            cnn: -1.0,
        };
        let r = pde002_residual(&q, 1.5, &[vec![0.1, 0.2, 0.7]]).unwrap();
        assert!((r[0] + 1.5).abs() < 1e-14);
    }

    #[test]
    fn normalized_quadratic_solves_blow1() {
        for b in [1.2, 1.5, 2.0] {
            let m = ModelSolution::by_name("quadratic", 3, b).unwrap();
            for r in blow1_residual(&m, b, &random_points(3, 20, 3)).unwrap() {
                assert!(r.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn classical_examples() {
        let pts = random_points(3, 100, 4);
        for r in ma31_residual(&ModelSolution::JwRadial { n: 3 }, &pts).unwrap() {
            assert_eq!(r, 0.0);
        }
        for r in ma31_residual(&ModelSolution::JwFlat { n: 3 }, &pts).unwrap() {
            assert_eq!(r, 0.0);
        }
        let s = ma41_residual(&ModelSolution::Savin { n: 3 }, &[vec![0.5, 0.2, 0.7]]).unwrap();
        assert!(s[0].abs() < 1e-12);
        for r in ma41_residual(&ModelSolution::Savin { n: 4 }, &random_points(4, 100, 5)).unwrap() {
            assert!(r.abs() < 1e-12);
        }
        let e = ModelSolution::Example31 { eps: 0.5 };
        assert!(r31_residual(&e, 0.5, &[vec![0.3, 0.2]]).unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn boundary_points_are_rejected() {
        let m = ModelSolution::Example33 { n: 2, b: 1.5 };
        let err = blow1_residual(&m, 1.5, &[vec![0.1, 0.0]]).unwrap_err();
        assert_eq!(err.token(), "on-boundary");
        assert!(ModelSolution::by_name("example33", 3, 3.0).is_err());
    }

    #[test]
    fn hessians_match_finite_differences() {
        let models = [
            ModelSolution::Example31 { eps: 0.5 },
            ModelSolution::Example33 { n: 3, b: 1.5 },
            ModelSolution::Example33Conjugate { n: 3, b: 5.0 / 3.0 },
            ModelSolution::JwRadial { n: 3 },
            ModelSolution::JwFlat { n: 3 },
            ModelSolution::Savin { n: 3 },
            ModelSolution::normalized_quadratic(3, 1.2).unwrap(),
        ];
        for m in &models {
            let n = m.dim();
            let mut pts = random_points(n, 100, 6);
            if n == 2 {
                // keep example31 away from its y = 0 kink
                pts.iter_mut().for_each(|p| p[1] = p[1].max(0.2));
            }
            pts.iter_mut().for_each(|p| p[n - 1] = p[n - 1].max(0.3));
            for (h, tol) in [(1e-2, 4e-3), (5e-3, 1e-3)] {
                let fd = FiniteDifference { inner: m, h };
                for p in &pts {
                    let a = m.hessian(p).unwrap();
                    let b = fd.hessian(p).unwrap();
                    let ga = m.gradient(p).unwrap();
                    let gb = fd.gradient(p).unwrap();
                    let scale = 1.0 + a.amax();
                    assert!((&a - b).amax() < tol * scale, "{} at {p:?}", m.name());
                    assert!(ga.iter().zip(&gb).all(|(x, y)| (x - y).abs() < tol * scale));
                }
            }
        }
    }

    #[test]
    fn quadratic_partial_conjugate() {
        let m = ModelSolution::JwRadial { n: 2 };
        let psi = HalfGridFunction::sample(&m, &AxisBox::symmetric(1, 2.0).unwrap(), (0.0, 1.0), &[161, 11]).unwrap();
        assert!(psi.boundary_normal_derivative().unwrap() < 1e-12);
        let star = partial_legendre(&psi, &AxisBox::symmetric(1, 1.0).unwrap(), Some(&[21])).unwrap();
        for i in 0..star.grid.len() {
            let y = star.grid.node(&star.grid.multi_index(i));
            let expect = 0.5 * y[0] * y[0] - 0.5 * y[1] * y[1];
            assert!((star.grid.values()[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn non_convex_slice_is_rejected() {
        let g = ScalarGrid::square(1.0, 0.25, |x| -x[0] * x[0]).unwrap();
        let g = g.with_values(g.values().to_vec()).unwrap();
        let shifted = ScalarGrid::new(g.shape().to_vec(), vec![-1.0, 0.0], g.spacing().to_vec(), g.values().to_vec()).unwrap();
        let psi = HalfGridFunction::new(shifted).unwrap();
        let err = partial_legendre(&psi, &AxisBox::symmetric(1, 0.5).unwrap(), None).unwrap_err();
        assert_eq!(err.token(), "slice-not-convex");
    }
}
