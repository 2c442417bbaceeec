//! Calderon-Zygmund decomposition on the upper half-space for the measure
//! `mu_b = x_n^b dx`, with cube masses from the exact `x_n` antiderivative.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fit::fmt_num;
use crate::keldysh::mu_b_box;

/// Recursion depth cap below the seed mesh.
pub const MAX_DEPTH: usize = 40;

/// Values constant on the cells `origin + side * (i + [0, 1)^n)`; zero
/// outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub origin: Vec<f64>,
    pub side: f64,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl CellField {
    pub fn new(origin: Vec<f64>, side: f64, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let n = shape.len();
        if !(2..=3).contains(&n) || origin.len() != n {
            return Err(Error::UnsupportedDimension(n));
        }
        if !(side > 0.0 && side.is_finite()) || shape.iter().any(|&k| k == 0) {
            return Err(Error::InvalidGrid(format!("side {side}, shape {shape:?}")));
        }
        if origin[n - 1] < 0.0 {
            return Err(Error::InvalidGrid("cells must lie in x_n >= 0".into()));
        }
        if values.len() != shape.iter().product::<usize>() {
            return Err(Error::InvalidGrid("value count does not match the shape".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("cell {i}")));
        }
        Ok(CellField { origin, side, shape, values })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, k)| acc * k + i)
    }

    fn cell_lo(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().zip(&self.origin).map(|(i, o)| o + *i as f64 * self.side).collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut idx = Vec::with_capacity(x.len());
        for k in 0..x.len() {
            let t = ((x[k] - self.origin[k]) / self.side).floor();
            if t < 0.0 || t as usize >= self.shape[k] {
                return 0.0;
            }
            idx.push(t as usize);
        }
        self.values[self.flat(&idx)]
    }

    pub fn cell_centers(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..self.values.len())
            .map(|mut flat| {
                let mut idx = vec![0; n];
                for k in (0..n).rev() {
                    idx[k] = flat % self.shape[k];
                    flat /= self.shape[k];
                }
                self.cell_lo(&idx).iter().map(|v| v + 0.5 * self.side).collect()
            })
            .collect()
    }

    /// `(int f, int |f|, max |f|, sum over cells of mu_b(cell ∩ Q))` over the
    /// box `Q = lo + [0, side]^n`.
    fn moments(&self, lo: &[f64], side: f64, b: f64) -> Moments {
        let n = self.dim();
        let mut ranges = Vec::with_capacity(n);
        for k in 0..n {
            let a = ((lo[k] - self.origin[k]) / self.side).floor().max(0.0) as usize;
            let e = (((lo[k] + side - self.origin[k]) / self.side).ceil().max(0.0) as usize).min(self.shape[k]);
            if a >= e {
                return Moments::default();
            }
            ranges.push((a, e));
        }
        let mut m = Moments::default();
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        let mut olo = vec![0.0; n];
        let mut osz = vec![0.0; n];
        'cells: loop {
            let clo = self.cell_lo(&idx);
            let mut empty = false;
            for k in 0..n {
                let a = clo[k].max(lo[k]);
                let e = (clo[k] + self.side).min(lo[k] + side);
                olo[k] = a;
                osz[k] = e - a;
                empty |= osz[k] <= 0.0;
            }
            if !empty {
                let v = self.values[self.flat(&idx)];
                let mu = mu_b_box(&olo, &osz, b);
                m.int_f += v * mu;
                m.int_abs += v.abs() * mu;
                m.covered += mu;
                m.max_abs = m.max_abs.max(v.abs());
                m.cells.push((v, mu));
            }
            for k in (0..n).rev() {
                idx[k] += 1;
                if idx[k] < ranges[k].1 {
                    continue 'cells;
                }
                idx[k] = ranges[k].0;
            }
            break;
        }
        m
    }
}

#[derive(Debug, Default)]
struct Moments {
    int_f: f64,
    int_abs: f64,
    max_abs: f64,
    covered: f64,
    cells: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfCube {
    pub corner: Vec<f64>,
    pub side: f64,
    /// Bisections below the seed mesh.
    pub generation: usize,
}

impl HalfCube {
    pub fn mu_b(&self, b: f64) -> f64 {
        mu_b_box(&self.corner, &vec![self.side; self.corner.len()], b)
    }

    /// Half-open membership `corner <= x < corner + side`.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.corner).all(|(v, c)| *v >= *c && *v < c + self.side)
    }

    fn children(&self) -> Vec<HalfCube> {
        let n = self.corner.len();
        let half = self.side / 2.0;
        (0..1usize << n)
            .map(|mask| HalfCube {
                // the highest bit walks the first axis so children come out
                // in lexicographic order
                corner: (0..n)
                    .map(|k| self.corner[k] + if (mask >> (n - 1 - k)) & 1 == 1 { half } else { 0.0 })
                    .collect(),
                side: half,
                generation: self.generation + 1,
            })
            .collect()
    }
}

/// One stopping cube with its predecessor and `mu_b` averages.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingCube {
    pub cube: HalfCube,
    pub parent: HalfCube,
    pub mu: f64,
    /// `f_Q`, the `mu_b` average of `f`.
    pub f_avg: f64,
    /// `|f|_Q`.
    pub abs_avg: f64,
    pub parent_abs_avg: f64,
    /// `int |h_k| dmu_b`.
    pub h_abs: f64,
    /// `int h_k dmu_b`.
    pub h_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CZDecomposition {
    pub alpha: f64,
    pub b: f64,
    /// Seed mesh side `d`.
    pub seed_side: f64,
    /// Stopping cubes in lexicographic order of corner, then side.
    pub cubes: Vec<StoppingCube>,
    pub f_abs_integral: f64,
}

impl CZDecomposition {
    /// `g(x)`: `f_Q` on a stopping cube, `f(x)` elsewhere.
    pub fn g(&self, f: &CellField, x: &[f64]) -> f64 {
        match self.cubes.iter().find(|q| q.cube.contains(x)) {
            Some(q) => q.f_avg,
            None => f.eval(x),
        }
    }

    /// `h_k(x) = χ_{Q_k}(x) (f(x) - f_{Q_k})`.
    pub fn h(&self, k: usize, f: &CellField, x: &[f64]) -> f64 {
        let q = &self.cubes[k];
        if q.cube.contains(x) {
            f.eval(x) - q.f_avg
        } else {
            0.0
        }
    }

    /// `cube_id,corner_0..,side,mu_b,f_avg`.
    pub fn to_csv(&self) -> String {
        let n = self.cubes.first().map_or(0, |q| q.cube.corner.len());
        let mut s = String::from("cube_id");
        for k in 0..n {
            let _ = write!(s, ",corner_{k}");
        }
        s.push_str(",side,mu_b,f_avg\n");
        for (i, q) in self.cubes.iter().enumerate() {
            let _ = write!(s, "{i}");
            for c in &q.cube.corner {
                let _ = write!(s, ",{}", fmt_num(*c));
            }
            let _ = writeln!(s, ",{},{},{}", fmt_num(q.cube.side), fmt_num(q.mu), fmt_num(q.f_avg));
        }
        s
    }
}

/// Stopping-time decomposition at level `alpha`.
pub fn cz_decompose(f: &CellField, alpha: f64, b: f64) -> Result<CZDecomposition> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must be positive")));
    }
    if !(b > 0.0) {
        return Err(Error::InvalidParameter(format!("b = {b} must be positive")));
    }
    let n = f.dim();
    let hi: Vec<f64> = (0..n).map(|k| f.origin[k] + f.shape[k] as f64 * f.side).collect();
    let total = f.moments(&f.origin, hi.iter().zip(&f.origin).map(|(h, o)| h - o).fold(0.0, f64::max), b).int_abs;
    if !total.is_finite() {
        return Err(Error::NonFinite("int |f| dmu_b".into()));
    }
    // smallest power of two with alpha mu_b([0, d]^n) > int |f|
    let mut e = -60i32;
    let seed_side = loop {
        let d = 2f64.powi(e);
        if alpha * mu_b_box(&vec![0.0; n], &vec![d; n], b) > total {
            break d;
        }
        e += 1;
        if e > 200 {
            return Err(Error::InvalidParameter("no seed mesh satisfies the threshold".into()));
        }
    };
    let mut cubes = Vec::new();
    if total > 0.0 {
        let ranges: Vec<(i64, i64)> = (0..n)
            .map(|k| ((f.origin[k] / seed_side).floor() as i64, (hi[k] / seed_side).ceil() as i64))
            .collect();
        let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        'seeds: loop {
            let root = HalfCube {
                corner: idx.iter().map(|&i| i as f64 * seed_side).collect(),
                side: seed_side,
                generation: 0,
            };
            let m = f.moments(&root.corner, seed_side, b);
            if m.max_abs >= alpha {
                let mu = root.mu_b(b);
                descend(f, &root, m.int_abs / mu, alpha, b, &mut cubes)?;
            }
            for k in (0..n).rev() {
                idx[k] += 1;
                if idx[k] < ranges[k].1 {
                    continue 'seeds;
                }
                idx[k] = ranges[k].0;
            }
            break;
        }
    }
    cubes.sort_by(|a, b| {
        a.cube
            .corner
            .iter()
            .zip(&b.cube.corner)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cube.side.total_cmp(&b.cube.side))
    });
    Ok(CZDecomposition {
        alpha,
        b,
        seed_side,
        cubes,
        f_abs_integral: total,
    })
}

fn descend(f: &CellField, parent: &HalfCube, parent_abs_avg: f64, alpha: f64, b: f64, out: &mut Vec<StoppingCube>) -> Result<()> {
    if parent.generation >= MAX_DEPTH {
        return Err(Error::DepthExceeded(parent.generation));
    }
    for child in parent.children() {
        let m = f.moments(&child.corner, child.side, b);
        if m.max_abs < alpha {
            // no sub-cube can reach the threshold
            continue;
        }
        let mu = child.mu_b(b);
        let abs_avg = m.int_abs / mu;
        if abs_avg >= alpha {
            let f_avg = m.int_f / mu;
            let outside = (mu - m.covered).max(0.0);
            let h_abs = m.cells.iter().map(|(v, w)| (v - f_avg).abs() * w).sum::<f64>() + f_avg.abs() * outside;
            let h_mean = m.cells.iter().map(|(v, w)| (v - f_avg) * w).sum::<f64>() - f_avg * outside;
            out.push(StoppingCube {
                cube: child.clone(),
                parent: parent.clone(),
                mu,
                f_avg,
                abs_avg,
                parent_abs_avg,
                h_abs,
                h_mean,
            });
        } else {
            descend(f, &child, abs_avg, alpha, b, out)?;
        }
    }
    Ok(())
}

/// One verified property.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyRow {
    pub property: String,
    pub bound: f64,
    pub worst: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CZReport {
    pub constant: f64,
    pub rows: Vec<PropertyRow>,
}

impl CZReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, name: &str) -> Option<&PropertyRow> {
        self.rows.iter().find(|r| r.property == name)
    }

    /// `property,bound,worst,pass`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("property,bound,worst,pass\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.property, fmt_num(r.bound), fmt_num(r.worst), r.pass);
        }
        s
    }
}

/// Tolerance for `int h_k dmu_b = 0`.
pub const MEAN_ZERO_TOL: f64 = 1e-12;

/// Checks the three decomposition properties with `c = 2^{n+2b+1}`, the
/// predecessor bounds, disjointness, and exact reconstruction at every
/// cell centre of `f` and every stopping-cube centre.
pub fn cz_verify(dec: &CZDecomposition, f: &CellField) -> CZReport {
    let n = f.dim();
    let alpha = dec.alpha;
    let b = dec.b;
    let c = 2f64.powf(n as f64 + 2.0 * b + 1.0);
    let total = dec.f_abs_integral;
    let mut rows = Vec::new();
    let mut push = |property: &str, bound: f64, worst: f64, pass: bool| {
        rows.push(PropertyRow {
            property: property.to_string(),
            bound,
            worst,
            pass,
        })
    };

    let mut samples = f.cell_centers();
    samples.extend(
        dec.cubes
            .iter()
            .map(|q| q.cube.corner.iter().map(|v| v + 0.5 * q.cube.side).collect::<Vec<f64>>()),
    );
    let g_worst = samples.iter().map(|x| dec.g(f, x).abs() / alpha).fold(0.0, f64::max);
    push("g_pointwise", c, g_worst, g_worst <= c);

    let inside: f64 = dec.cubes.iter().map(|q| q.abs_avg * q.mu).sum();
    let replaced: f64 = dec.cubes.iter().map(|q| q.f_avg.abs() * q.mu).sum();
    let g_int = (total - inside).max(0.0) + replaced;
    let ratio = if total > 0.0 { g_int / total } else { 0.0 };
    push("g_integral", c, ratio, g_int <= c * total * (1.0 + 1e-12));

    let h_worst = dec.cubes.iter().map(|q| q.h_abs / (alpha * q.mu)).fold(0.0, f64::max);
    push("h_integral", c, h_worst, h_worst <= c);

    let mean_worst = dec.cubes.iter().map(|q| q.h_mean.abs()).fold(0.0, f64::max);
    push("h_mean_zero", MEAN_ZERO_TOL, mean_worst, mean_worst <= MEAN_ZERO_TOL);

    let covered: f64 = dec.cubes.iter().map(|q| q.mu).sum();
    let cover = if total > 0.0 { alpha * covered / total } else { 0.0 };
    push("cube_measure", c, cover, covered <= c / alpha * total * (1.0 + 1e-12));

    let pred = dec.cubes.iter().map(|q| q.parent.mu_b(b) / q.mu).fold(0.0, f64::max);
    push("predecessor_measure", c, pred, pred <= c);

    let avg_worst = dec.cubes.iter().map(|q| q.abs_avg / alpha).fold(0.0, f64::max);
    push("stopping_average", c, avg_worst, avg_worst <= c);

    let threshold_ok = dec.cubes.iter().all(|q| q.abs_avg >= alpha && q.parent_abs_avg < alpha);
    let parent_worst = dec.cubes.iter().map(|q| q.parent_abs_avg / alpha).fold(0.0, f64::max);
    push("stopping_threshold", 1.0, parent_worst, threshold_ok);

    let mut overlaps = 0usize;
    for (i, p) in dec.cubes.iter().enumerate() {
        for q in &dec.cubes[i + 1..] {
            let disjoint = (0..n).any(|k| {
                p.cube.corner[k] + p.cube.side <= q.cube.corner[k] || q.cube.corner[k] + q.cube.side <= p.cube.corner[k]
            });
            if !disjoint {
                overlaps += 1;
            }
        }
    }
    push("disjoint", 0.0, overlaps as f64, overlaps == 0);

    let recon = samples
        .iter()
        .map(|x| {
            let hsum: f64 = (0..dec.cubes.len()).map(|k| dec.h(k, f, x)).sum();
            (f.eval(x) - dec.g(f, x) - hsum).abs()
        })
        .fold(0.0, f64::max);
    push("reconstruction", 1e-12, recon, recon <= 1e-12);

    CZReport { constant: c, rows }
}

/// Random piecewise-constant field on cells of side `1/8`: 2 to 6 cells per
/// axis, about 40% of them zero, the rest uniform in `(-20, 20)`, with the
/// grid placed at a random lattice offset in the half-space.
pub fn random_cell_field(rng: &mut impl Rng, n: usize) -> Result<CellField> {
    let side = 0.125;
    let shape: Vec<usize> = (0..n).map(|_| rng.gen_range(2..7)).collect();
    let mut origin: Vec<f64> = (0..n).map(|_| rng.gen_range(-4i32..4) as f64 * side).collect();
    origin[n - 1] = rng.gen_range(0..3) as f64 * side;
    let count = shape.iter().product();
    let values = (0..count)
        .map(|_| if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(-20.0..20.0) })
        .collect();
    CellField::new(origin, side, shape, values)
}

/// One case of [`cz_random_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteCase {
    pub n: usize,
    pub b: f64,
    pub alpha: f64,
    pub field: CellField,
    pub decomposition: CZDecomposition,
    pub report: CZReport,
}

/// Weights cycled through by the random suite.
pub const SUITE_WEIGHTS: [f64; 3] = [1.2, 1.5, 2.0];

/// `cases` seeded decompositions: every fourth case is three-dimensional,
/// `b` cycles through [`SUITE_WEIGHTS`], `alpha` is uniform in `(0.1, 10)`.
/// `fixed_n` and `fixed_b` pin the dimension or the weight.
pub fn cz_random_suite(seed: u64, cases: usize, fixed_n: Option<usize>, fixed_b: Option<f64>) -> Result<Vec<SuiteCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cases)
        .map(|i| {
            let n = fixed_n.unwrap_or(if i % 4 == 3 { 3 } else { 2 });
            let b = fixed_b.unwrap_or(SUITE_WEIGHTS[i % 3]);
            let field = random_cell_field(&mut rng, n)?;
            let alpha = rng.gen_range(0.1..10.0);
            let decomposition = cz_decompose(&field, alpha, b)?;
            let report = cz_verify(&decomposition, &field);
            Ok(SuiteCase {
                n,
                b,
                alpha,
                field,
                decomposition,
                report,
            })
        })
        .collect()
}

/// Worst value of every property per `(n, b)` group of a suite, groups in
/// order of first appearance.
pub fn suite_summary(cases: &[SuiteCase]) -> Vec<(usize, f64, CZReport)> {
    let mut groups: Vec<(usize, f64, CZReport)> = Vec::new();
    for case in cases {
        match groups.iter_mut().find(|(n, b, _)| *n == case.n && *b == case.b) {
            Some((_, _, acc)) => {
                for (a, r) in acc.rows.iter_mut().zip(&case.report.rows) {
                    a.worst = a.worst.max(r.worst);
                    a.pass &= r.pass;
                }
            }
            None => groups.push((case.n, case.b, case.report.clone())),
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn below_threshold_has_no_cubes() {
        let f = CellField::new(vec![0.0, 0.0], 1.0, vec![1, 1], vec![0.5]).unwrap();
        let dec = cz_decompose(&f, 1.0, 1.5).unwrap();
        assert!(dec.cubes.is_empty());
        assert_eq!(dec.g(&f, &[0.5, 0.5]), 0.5);
        assert!(cz_verify(&dec, &f).all_pass());
    }

    #[test]
    fn seed_condition_holds() {
        let f = CellField::new(vec![0.0, 0.0], 0.1, vec![1, 1], vec![100.0]).unwrap();
        let dec = cz_decompose(&f, 1.0, 1.5).unwrap();
        let mu = |d: f64| mu_b_box(&[0.0, 0.0], &[d, d], 1.5);
        assert!(mu(dec.seed_side) > dec.f_abs_integral);
        assert!(mu(dec.seed_side / 2.0) <= dec.f_abs_integral);
    }

    #[test]
    fn spike_satisfies_every_property() {
        let f = CellField::new(vec![0.0, 0.0], 0.1, vec![1, 1], vec![100.0]).unwrap();
        let dec = cz_decompose(&f, 1.0, 1.5).unwrap();
        let rep = cz_verify(&dec, &f);
        assert_eq!(rep.constant, 64.0);
        assert!(rep.all_pass(), "{}", rep.to_csv());
        assert!(!dec.cubes.is_empty());
    }

    #[test]
    fn invalid_inputs() {
        let f = CellField::new(vec![0.0, 0.0], 1.0, vec![1, 1], vec![1.0]).unwrap();
        assert!(cz_decompose(&f, 0.0, 1.5).is_err());
        assert!(CellField::new(vec![0.0, 0.0], 1.0, vec![1, 1], vec![f64::NAN]).is_err());
        assert!(CellField::new(vec![0.0, -1.0], 1.0, vec![1, 1], vec![1.0]).is_err());
    }
}
