//! Planar Monge-Ampere obstacle problem `det D^2 v = f chi_{v > 0}` on a
//! square with positive Dirichlet data, and free-boundary extraction.
//!
//! The discrete operator is the monotone wide-stencil determinant
//!
//! ```text
//! MA_h(v)(x) = min_{(e, e')} (D_e v)^+ (D_{e'} v)^+,
//! D_e v = (v(x + e h) + v(x - e h) - 2 v(x)) / (|e| h)^2,
//! ```
//!
//! minimised over orthogonal pairs of primitive lattice vectors with
//! max-norm at most `width`. Nodes closer to the edge than a pair's reach
//! only use the pairs that fit.
//!
//! The nonlinear system is solved in complementarity form: at every node
//! either `v > 0` and `MA_h(v) = f`, or `v = 0` and `MA_h(v) <= f`. Each
//! relaxation step solves the per-pair quadratic exactly, keeps the
//! smallest root over pairs and projects onto `v >= 0`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::body::{convex_hull, hausdorff, marching_squares, ConvexBody2D, Point};
use crate::grid::ScalarGrid;
use crate::radial::RadialBenchmark;

/// A planar field given in closed form or by samples.
#[derive(Clone)]
pub enum Field2 {
    Const(f64),
    /// `scale * v_rad(|y|)` with `v_rad` the unit radial obstacle profile.
    Radial { scale: f64 },
    /// `|y|^2 / 2 + c`.
    Quadratic { c: f64 },
    Grid(ScalarGrid),
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Field2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Field2::Const(c) => write!(f, "const:{c}"),
            Field2::Radial { scale } => write!(f, "radial-exact(x{scale})"),
            Field2::Quadratic { c } => write!(f, "quadratic:{c}"),
            Field2::Grid(g) => write!(f, "grid{:?}", g.shape()),
            Field2::Custom(_) => write!(f, "custom"),
        }
    }
}

impl Field2 {
    pub fn custom(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Field2::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Field2::Const(c) => *c,
            Field2::Radial { scale } => {
                scale * RadialBenchmark::new(2).primal((x[0] * x[0] + x[1] * x[1]).sqrt())
            }
            Field2::Quadratic { c } => 0.5 * (x[0] * x[0] + x[1] * x[1]) + c,
            Field2::Grid(g) => g
                .sample_linear(x)
                .unwrap_or_else(|| g.sample_linear(&clamp_into(g, x)).unwrap_or(0.0)),
            Field2::Custom(f) => f(x),
        }
    }
}

fn clamp_into(g: &ScalarGrid, x: &[f64]) -> Vec<f64> {
    let b = g.bounding_box();
    x.iter()
        .enumerate()
        .map(|(k, v)| v.clamp(b.lo[k], b.hi[k]))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ObstacleProblem {
    /// Domain is `[-half_width, half_width]^2`.
    pub half_width: f64,
    pub h: f64,
    pub source: Field2,
    pub boundary: Field2,
}

impl ObstacleProblem {
    /// Unit-source radial benchmark on `[-2, 2]^2`.
    pub fn radial(h: f64) -> Self {
        ObstacleProblem {
            half_width: 2.0,
            h,
            source: Field2::Const(1.0),
            boundary: Field2::Radial { scale: 1.0 },
        }
    }

    pub fn nodes_per_side(&self) -> usize {
        (2.0 * self.half_width / self.h).round() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.half_width > 0.0) {
            return Err(Error::InvalidParameter("h and L must be positive".into()));
        }
        let steps = 2.0 * self.half_width / self.h;
        if (steps - steps.round()).abs() > 1e-9 || steps.round() < 4.0 {
            return Err(Error::InvalidParameter(format!(
                "2L/h = {steps} must be an integer >= 4"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Residual tolerance; `None` means `1e-8 * max f`.
    pub tol: Option<f64>,
    /// Per-level sweep cap; `None` means `50 * sqrt(nodes)`.
    pub max_sweeps: Option<usize>,
    /// Stencil reach in lattice units.
    pub width: usize,
    /// Contact threshold factor: nodes with `v <= kappa h^2` count as contact.
    pub kappa: f64,
    /// Over-relaxation factor for the projected sweeps.
    pub omega: f64,
    /// Solve on successively halved grids, interpolating upward.
    pub cascade: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: None,
            max_sweeps: None,
            width: 3,
            kappa: 4.0,
            omega: 1.4,
            cascade: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObstacleSolution {
    pub v: ScalarGrid,
    pub sweeps: usize,
    pub residual: f64,
    pub contact_nodes: usize,
}

/// Orthogonal pairs of primitive lattice directions with max-norm `<= width`,
/// sorted by reach.
pub fn direction_pairs(width: usize) -> Vec<([isize; 2], [isize; 2])> {
    let w = width as isize;
    let mut pairs = Vec::new();
    for p in 0..=w {
        for q in -w..=w {
            // canonical representative: p > 0, or p == 0 and q > 0
            if (p == 0 && q <= 0) || gcd(p.unsigned_abs(), q.unsigned_abs()) != 1 {
                continue;
            }
            let perp = canonical([-q, p]);
            let e = [p, q];
            if e < perp {
                pairs.push((e, perp));
            }
        }
    }
    pairs.sort_by_key(|(e, _)| (reach(*e), *e));
    pairs
}

fn canonical(e: [isize; 2]) -> [isize; 2] {
    if e[0] > 0 || (e[0] == 0 && e[1] > 0) {
        e
    } else {
        [-e[0], -e[1]]
    }
}

fn reach(e: [isize; 2]) -> usize {
    e[0].unsigned_abs().max(e[1].unsigned_abs())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Precomputed stencil: flat offsets and scale factors for every pair.
struct Stencil {
    n: usize,
    /// (offset1, offset2, |e|^2 h^2, reach)
    pairs: Vec<(isize, isize, f64, usize)>,
}

impl Stencil {
    fn new(n: usize, h: f64, width: usize) -> Self {
        let ni = n as isize;
        let pairs = direction_pairs(width)
            .into_iter()
            .map(|(e1, e2)| {
                let len2 = (e1[0] * e1[0] + e1[1] * e1[1]) as f64;
                (
                    e1[0] * ni + e1[1],
                    e2[0] * ni + e2[1],
                    len2 * h * h,
                    reach(e1),
                )
            })
            .collect();
        Stencil { n, pairs }
    }

    #[inline]
    fn depth(&self, i: usize, j: usize) -> usize {
        i.min(j).min(self.n - 1 - i).min(self.n - 1 - j)
    }

    /// Value at `k` solving the node equation with right-hand side `f`, given
    /// neighbours. Contact projection is applied by the caller.
    #[inline]
    fn local_solve(&self, v: &[f64], k: usize, depth: usize, f: f64) -> f64 {
        let mut best = f64::INFINITY;
        for &(o1, o2, a, r) in &self.pairs {
            if r > depth {
                break;
            }
            let s1 = v[(k as isize + o1) as usize] + v[(k as isize - o1) as usize];
            let s2 = v[(k as isize + o2) as usize] + v[(k as isize - o2) as usize];
            let c = f * a * a;
            let d = s1 - s2;
            let z = 0.5 * ((s1 + s2) - (d * d + 4.0 * c).sqrt());
            best = best.min(0.5 * z);
        }
        best
    }

    #[inline]
    fn operator(&self, v: &[f64], k: usize, depth: usize) -> f64 {
        let mut best = f64::INFINITY;
        let c = v[k];
        for &(o1, o2, a, r) in &self.pairs {
            if r > depth {
                break;
            }
            let d1 = (v[(k as isize + o1) as usize] + v[(k as isize - o1) as usize] - 2.0 * c) / a;
            let d2 = (v[(k as isize + o2) as usize] + v[(k as isize - o2) as usize] - 2.0 * c) / a;
            best = best.min(d1.max(0.0) * d2.max(0.0));
        }
        best
    }
}

/// Discrete operator `MA_h(v)` at every interior node (zero on the boundary).
pub fn discrete_monge_ampere(v: &ScalarGrid, width: usize) -> Result<ScalarGrid> {
    let n = square_side(v)?;
    let st = Stencil::new(n, v.spacing()[0], width);
    let vals = v.values();
    let mut out = vec![0.0; vals.len()];
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let k = i * n + j;
            out[k] = st.operator(vals, k, st.depth(i, j));
        }
    }
    v.with_values(out)
}

fn square_side(v: &ScalarGrid) -> Result<usize> {
    let s = v.shape();
    if v.dim() != 2 || s[0] != s[1] || (v.spacing()[0] - v.spacing()[1]).abs() > 1e-15 {
        return Err(Error::InvalidGrid("square 2-D grid with equal spacing expected".into()));
    }
    Ok(s[0])
}

struct Level {
    n: usize,
    h: f64,
    half_width: f64,
    f: Vec<f64>,
    v: Vec<f64>,
}

impl Level {
    fn new(p: &ObstacleProblem, h: f64) -> Self {
        let n = (2.0 * p.half_width / h).round() as usize + 1;
        let l = p.half_width;
        let mut f = vec![0.0; n * n];
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let x = [-l + i as f64 * h, -l + j as f64 * h];
                f[i * n + j] = p.source.eval(&x);
                if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                    v[i * n + j] = p.boundary.eval(&x);
                }
            }
        }
        Level {
            n,
            h,
            half_width: l,
            f,
            v,
        }
    }

    /// Transfinite (Coons) interpolation of the boundary trace; its
    /// directional second differences vanish along the axes, so it lies above
    /// the solution.
    fn coons_start(&mut self) {
        let n = self.n;
        let m = (n - 1) as f64;
        let b = self.v.clone();
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let s = i as f64 / m;
                let t = j as f64 / m;
                let edges = (1.0 - s) * b[j] + s * b[(n - 1) * n + j] + (1.0 - t) * b[i * n]
                    + t * b[i * n + n - 1];
                let corners = (1.0 - s) * (1.0 - t) * b[0]
                    + (1.0 - s) * t * b[n - 1]
                    + s * (1.0 - t) * b[(n - 1) * n]
                    + s * t * b[n * n - 1];
                self.v[i * n + j] = (edges - corners).max(0.0);
            }
        }
    }

    /// Bilinear prolongation of a coarse level's interior onto this level.
    fn prolong_from(&mut self, coarse: &Level) {
        let n = self.n;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let x = -self.half_width + i as f64 * self.h;
                let y = -self.half_width + j as f64 * self.h;
                let ti = (x + coarse.half_width) / coarse.h;
                let tj = (y + coarse.half_width) / coarse.h;
                let i0 = (ti.floor() as usize).min(coarse.n - 2);
                let j0 = (tj.floor() as usize).min(coarse.n - 2);
                let (a, b) = (ti - i0 as f64, tj - j0 as f64);
                let c = |ii: usize, jj: usize| coarse.v[ii * coarse.n + jj];
                self.v[i * n + j] = (1.0 - a) * (1.0 - b) * c(i0, j0)
                    + a * (1.0 - b) * c(i0 + 1, j0)
                    + (1.0 - a) * b * c(i0, j0 + 1)
                    + a * b * c(i0 + 1, j0 + 1);
            }
        }
    }

    fn sweep(&mut self, st: &Stencil, omega: f64) {
        let n = self.n;
        // red-black ordering
        for color in 0..2 {
            for i in 1..n - 1 {
                let start = 1 + ((i + 1 + color) % 2);
                let mut j = start;
                while j < n - 1 {
                    let k = i * n + j;
                    let d = st.depth(i, j);
                    let target = st.local_solve(&self.v, k, d, self.f[k]);
                    let old = self.v[k];
                    self.v[k] = (old + omega * (target - old)).max(0.0);
                    j += 2;
                }
            }
        }
    }

    /// Complementarity residual: `|MA - f|` where `v > 0`, `(MA - f)^+` where
    /// `v = 0`. Also returns the contact mask.
    fn residual(&self, st: &Stencil, kappa: f64) -> (f64, Vec<bool>) {
        let n = self.n;
        let thresh = kappa * self.h * self.h;
        let mut worst: f64 = 0.0;
        let mut mask = vec![false; n * n];
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let k = i * n + j;
                let ma = st.operator(&self.v, k, st.depth(i, j));
                let r = if self.v[k] > 0.0 {
                    (ma - self.f[k]).abs()
                } else {
                    (ma - self.f[k]).max(0.0)
                };
                worst = worst.max(r);
                mask[k] = self.v[k] > thresh;
            }
        }
        (worst, mask)
    }

    fn solve(&mut self, opts: &SolverOptions, tol: f64) -> Result<(usize, f64)> {
        let st = Stencil::new(self.n, self.h, opts.width);
        let max_sweeps = opts
            .max_sweeps
            .unwrap_or_else(|| 50 * ((self.n * self.n) as f64).sqrt().ceil() as usize);
        let check_every = 10;
        let mut stable = 0usize;
        let mut last_mask: Option<Vec<bool>> = None;
        let mut sweeps = 0;
        let mut residual = f64::INFINITY;
        let mut omega = opts.omega;
        let mut best = f64::INFINITY;
        let mut best_at = 0usize;
        while sweeps < max_sweeps {
            for _ in 0..check_every {
                self.sweep(&st, omega);
            }
            sweeps += check_every;
            let (r, mask) = self.residual(&st, opts.kappa);
            residual = r;
            if r < best {
                best = r;
                best_at = sweeps;
            } else if sweeps - best_at >= 1000 && omega > 1.0 {
                // over-relaxation can cycle between stencil pairs; back off
                omega = 1.0 + 0.5 * (omega - 1.0);
                best_at = sweeps;
            }
            if last_mask.as_ref() == Some(&mask) {
                stable += 1;
            } else {
                stable = 0;
            }
            last_mask = Some(mask);
            if residual <= tol && stable >= 2 {
                // confirm with three consecutive single sweeps
                let mut ok = true;
                for _ in 0..3 {
                    self.sweep(&st, 1.0);
                    sweeps += 1;
                    let (r, mask) = self.residual(&st, opts.kappa);
                    residual = r;
                    if Some(&mask) != last_mask.as_ref() || r > tol {
                        ok = false;
                        last_mask = Some(mask);
                    }
                }
                if ok {
                    return Ok((sweeps, residual));
                }
            }
        }
        Err(Error::NotConverged { sweeps, residual })
    }
}

/// Solves the obstacle problem to residual `tol`.
pub fn solve_obstacle(p: &ObstacleProblem, tol: f64) -> Result<ScalarGrid> {
    let opts = SolverOptions {
        tol: Some(tol),
        ..SolverOptions::default()
    };
    Ok(solve_obstacle_with(p, &opts)?.v)
}

pub fn solve_obstacle_with(p: &ObstacleProblem, opts: &SolverOptions) -> Result<ObstacleSolution> {
    p.validate()?;
    let fine = Level::new(p, p.h);
    if fine.f.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
        return Err(Error::NegativeSource);
    }
    let n = fine.n;
    for i in 0..n {
        for j in 0..n {
            if (i == 0 || j == 0 || i == n - 1 || j == n - 1) && !(fine.v[i * n + j] > 0.0) {
                return Err(Error::NonpositiveBoundary);
            }
        }
    }
    let fmax = fine.f.iter().cloned().fold(0.0, f64::max);
    let tol = opts.tol.unwrap_or(1e-8 * fmax);

    // coarse-to-fine hierarchy: halve h while the coarse grid keeps >= 17 nodes
    let mut hs = vec![p.h];
    if opts.cascade {
        loop {
            let hc = hs.last().unwrap() * 2.0;
            let steps = 2.0 * p.half_width / hc;
            if steps < 16.0 || (steps - steps.round()).abs() > 1e-9 || (steps.round() as usize) % 2 == 1 {
                break;
            }
            hs.push(hc);
        }
    }
    hs.reverse();
    let mut total = 0;
    let mut prev: Option<Level> = None;
    let mut residual = f64::INFINITY;
    let last = hs.len() - 1;
    for (li, &h) in hs.iter().enumerate() {
        let mut level = if li == last { fine.clone_level() } else { Level::new(p, h) };
        match &prev {
            None => level.coons_start(),
            Some(c) => level.prolong_from(c),
        }
        // coarse levels only need a good start; use a looser tolerance there
        let level_tol = if li == last { tol } else { tol.max(1e-6 * fmax) };
        let (s, r) = level.solve(opts, level_tol)?;
        total += s;
        residual = r;
        prev = Some(level);
    }
    let level = prev.expect("at least one level");
    let thresh = opts.kappa * level.h * level.h;
    let contact_nodes = level.v.iter().filter(|&&x| x <= thresh).count();
    let v = ScalarGrid::new(
        vec![level.n, level.n],
        vec![-p.half_width; 2],
        vec![level.h; 2],
        level.v,
    )?;
    Ok(ObstacleSolution {
        v,
        sweeps: total,
        residual,
        contact_nodes,
    })
}

impl Level {
    fn clone_level(&self) -> Level {
        Level {
            n: self.n,
            h: self.h,
            half_width: self.half_width,
            f: self.f.clone(),
            v: self.v.clone(),
        }
    }
}

/// Free boundary `Gamma` and the contact set it encloses.
#[derive(Debug, Clone)]
pub struct FreeBoundary {
    /// Ordered contour points of `{v = level}`.
    pub polyline: Vec<Point>,
    /// Convex hull of the contour, counterclockwise; empty when no contact.
    pub contact_set: ConvexBody2D,
    pub level: f64,
    /// Hausdorff distance between the raw contour and its hull.
    pub hull_defect: f64,
}

impl FreeBoundary {
    pub fn is_empty(&self) -> bool {
        self.polyline.is_empty()
    }
}

/// Contour of `{v = kappa h^2}` (kappa = 4) around the contact region,
/// followed by convex-hull projection.
pub fn extract_free_boundary(v: &ScalarGrid, h: f64) -> Result<FreeBoundary> {
    extract_free_boundary_at(v, 4.0 * h * h)
}

pub fn extract_free_boundary_at(v: &ScalarGrid, level: f64) -> Result<FreeBoundary> {
    square_side(v)?;
    let contours = marching_squares(v, level);
    // the contour enclosing the largest area is the free boundary
    let best = contours
        .into_iter()
        .filter(|c| c.len() >= 3)
        .max_by(|a, b| polyline_area(a).abs().total_cmp(&polyline_area(b).abs()));
    let Some(polyline) = best else {
        return Ok(FreeBoundary {
            polyline: Vec::new(),
            contact_set: ConvexBody2D::empty(),
            level,
            hull_defect: 0.0,
        });
    };
    let hull = convex_hull(&polyline);
    let hull_defect = hausdorff(&polyline, &hull.vertices);
    Ok(FreeBoundary {
        polyline,
        contact_set: hull,
        level,
        hull_defect,
    })
}

fn polyline_area(p: &[Point]) -> f64 {
    let n = p.len();
    (0..n)
        .map(|i| {
            let a = p[i];
            let b = p[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        * 0.5
}
