//! Discrete Legendre transforms, convex envelopes and the Monge-Ampere
//! measure of grid functions.
//!
//! The discrete conjugate `u(x) = max_y (x . y - f(y))` over grid nodes `y`
//! factors over axes: conjugating one axis at a time turns a `d`-dimensional
//! sup into `d` one-dimensional upper envelopes of lines, each evaluated in
//! linear time.

use rayon::prelude::*;

use crate::body::{ConvexBody2D, Point};
use crate::error::{Error, Result};
use crate::grid::{AxisBox, ScalarGrid};

/// Upper envelope `max_j (s_j x + c_j)` of lines with strictly increasing
/// slopes, evaluated at increasing abscissae `xs`. Lines with `c_j = -inf`
/// are ignored; if every line is absent the result is `-inf`.
fn upper_envelope(slopes: &[f64], icpt: &[f64], xs: &[f64], out: &mut [f64]) {
    let mut hull: Vec<usize> = Vec::with_capacity(slopes.len());
    // line b is useless if a and c meet at or above b
    let useless = |a: usize, b: usize, c: usize| {
        (icpt[c] - icpt[a]) * (slopes[b] - slopes[a]) >= (icpt[b] - icpt[a]) * (slopes[c] - slopes[a])
    };
    for j in 0..slopes.len() {
        if icpt[j] == f64::NEG_INFINITY {
            continue;
        }
        while hull.len() >= 2 && useless(hull[hull.len() - 2], hull[hull.len() - 1], j) {
            hull.pop();
        }
        hull.push(j);
    }
    if hull.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::NEG_INFINITY);
        return;
    }
    let mut p = 0;
    for (o, &x) in out.iter_mut().zip(xs) {
        while p + 1 < hull.len() {
            let (a, b) = (hull[p], hull[p + 1]);
            if slopes[b] * x + icpt[b] >= slopes[a] * x + icpt[a] {
                p += 1;
            } else {
                break;
            }
        }
        let a = hull[p];
        *o = slopes[a] * x + icpt[a];
    }
}

/// Conjugates axis `axis` of a row-major array of shape `shape`, replacing
/// primal coordinates `ys` by dual coordinates `xs`.
fn conjugate_axis(vals: &[f64], shape: &[usize], axis: usize, ys: &[f64], xs: &[f64]) -> Vec<f64> {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let (n, m) = (shape[axis], xs.len());
    let mut out = vec![0.0; outer * m * inner];
    out.par_chunks_mut(m * inner)
        .enumerate()
        .for_each(|(o, block)| {
            let mut line = vec![0.0; n];
            let mut res = vec![0.0; m];
            for i in 0..inner {
                for (j, l) in line.iter_mut().enumerate() {
                    *l = vals[(o * n + j) * inner + i];
                }
                upper_envelope(ys, &line, xs, &mut res);
                for (j, r) in res.iter().enumerate() {
                    block[j * inner + i] = *r;
                }
            }
        });
    out
}

fn axis_nodes(origin: f64, h: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| origin + i as f64 * h).collect()
}

/// Conjugate of `-neg` where `neg` holds `-f` (with `-inf` marking nodes to
/// skip) on the primal grid of `f`.
fn conjugate_raw(f: &ScalarGrid, neg: Vec<f64>, dual_box: &AxisBox, dual_shape: &[usize]) -> Vec<f64> {
    let d = f.dim();
    let mut shape = f.shape().to_vec();
    let mut cur = neg;
    for k in 0..d {
        let ys = axis_nodes(f.origin()[k], f.spacing()[k], f.shape()[k]);
        let hk = (dual_box.hi[k] - dual_box.lo[k]) / (dual_shape[k] - 1) as f64;
        let xs = axis_nodes(dual_box.lo[k], hk, dual_shape[k]);
        cur = conjugate_axis(&cur, &shape, k, &ys, &xs);
        shape[k] = dual_shape[k];
    }
    cur
}

fn check_dual(f: &ScalarGrid, dual_box: &AxisBox, dual_shape: &[usize]) -> Result<()> {
    if dual_box.dim() != f.dim() || dual_shape.len() != f.dim() {
        return Err(Error::EmptyBox("dual box dimension differs from grid".into()));
    }
    if dual_shape.iter().any(|&k| k < 2) {
        return Err(Error::InvalidGrid(format!("dual shape {dual_shape:?}")));
    }
    Ok(())
}

/// `u(x) = max_y (x . y - f(y))` over the nodes `y` of `f`, sampled on the
/// dual grid covering `dual_box` with `dual_shape` nodes.
pub fn legendre_transform(f: &ScalarGrid, dual_box: &AxisBox, dual_shape: &[usize]) -> Result<ScalarGrid> {
    check_dual(f, dual_box, dual_shape)?;
    let neg: Vec<f64> = f.values().iter().map(|v| -v).collect();
    let vals = conjugate_raw(f, neg, dual_box, dual_shape);
    dual_grid(dual_box, dual_shape, vals)
}

fn dual_grid(dual_box: &AxisBox, dual_shape: &[usize], vals: Vec<f64>) -> Result<ScalarGrid> {
    let spacing = (0..dual_box.dim())
        .map(|k| (dual_box.hi[k] - dual_box.lo[k]) / (dual_shape[k] - 1) as f64)
        .collect();
    ScalarGrid::new(dual_shape.to_vec(), dual_box.lo.clone(), spacing, vals)
}

/// Brute-force conjugate at a single dual point; the test oracle for the
/// separable transform.
pub fn conjugate_at(f: &ScalarGrid, x: &[f64]) -> f64 {
    (0..f.len())
        .map(|i| {
            let y = f.node(&f.multi_index(i));
            y.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - f.values()[i]
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest absolute forward difference quotient along each axis.
pub fn axis_slopes(f: &ScalarGrid) -> Vec<(f64, f64)> {
    let d = f.dim();
    let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
    let strides: Vec<usize> = (0..d).map(|k| f.shape()[k + 1..].iter().product()).collect();
    for flat in 0..f.len() {
        let idx = f.multi_index(flat);
        for k in 0..d {
            if idx[k] + 1 < f.shape()[k] {
                let s = (f.values()[flat + strides[k]] - f.values()[flat]) / f.spacing()[k];
                out[k].0 = out[k].0.min(s);
                out[k].1 = out[k].1.max(s);
            }
        }
    }
    out
}

/// Dual lattice for [`convexify`]: step equal to the primal step (coarsened
/// by powers of two for steep inputs), symmetric, containing zero, and wide
/// enough for every difference quotient of `f`.
pub fn convexify_dual(f: &ScalarGrid) -> Result<(AxisBox, Vec<usize>)> {
    let slopes = axis_slopes(f);
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let mut shape = Vec::new();
    for k in 0..f.dim() {
        let b = slopes[k].0.abs().max(slopes[k].1.abs());
        let mut step = f.spacing()[k];
        let cap = 4 * f.shape()[k];
        let mut half = (b / step).ceil().max(1.0) as usize;
        while 2 * half + 1 > cap {
            step *= 2.0;
            half = (b / step).ceil().max(1.0) as usize;
        }
        lo.push(-(half as f64) * step);
        hi.push(half as f64 * step);
        shape.push(2 * half + 1);
    }
    Ok((AxisBox::new(lo, hi)?, shape))
}

/// Lower convex envelope on the grid as the double conjugate.
pub fn convexify(f: &ScalarGrid) -> Result<ScalarGrid> {
    let (db, ds) = convexify_dual(f)?;
    convexify_with(f, &db, &ds)
}

/// Double conjugate through a caller-chosen dual grid.
pub fn convexify_with(f: &ScalarGrid, dual_box: &AxisBox, dual_shape: &[usize]) -> Result<ScalarGrid> {
    let u = legendre_transform(f, dual_box, dual_shape)?;
    let back = legendre_transform(&u, &f.bounding_box(), f.shape())?;
    // the primal grid is reproduced exactly; keep f's own metadata
    f.with_values(back.values().to_vec())
}

/// Smallest axis-aligned or diagonal second difference, relative to the
/// value scale. Non-negative (up to rounding) for convex grid functions.
pub fn convexity_defect(f: &ScalarGrid) -> f64 {
    let scale = f.max_abs().max(1.0);
    let d = f.dim();
    let strides: Vec<isize> = (0..d)
        .map(|k| f.shape()[k + 1..].iter().product::<usize>() as isize)
        .collect();
    let mut dirs: Vec<Vec<isize>> = (0..d)
        .map(|k| (0..d).map(|j| (j == k) as isize).collect())
        .collect();
    for a in 0..d {
        for b in a + 1..d {
            for s in [-1isize, 1] {
                let mut e = vec![0isize; d];
                e[a] = 1;
                e[b] = s;
                dirs.push(e);
            }
        }
    }
    let v = f.values();
    let mut worst = f64::INFINITY;
    for flat in 0..f.len() {
        let idx = f.multi_index(flat);
        'dir: for e in &dirs {
            for k in 0..d {
                let i = idx[k] as isize;
                if i - e[k].abs() < 0 || i + e[k].abs() >= f.shape()[k] as isize {
                    continue 'dir;
                }
            }
            let off: isize = e.iter().zip(&strides).map(|(a, b)| a * b).sum();
            let c = flat as isize;
            let dd = v[(c + off) as usize] + v[(c - off) as usize] - 2.0 * v[flat];
            worst = worst.min(dd);
        }
    }
    if worst == f64::INFINITY {
        0.0
    } else {
        worst / scale
    }
}

/// Options for [`ma_measure_with`].
#[derive(Debug, Clone)]
pub struct MeasureOptions {
    /// Dual raster; `None` sizes it from the gradient range of `u`.
    pub dual_box: Option<AxisBox>,
    pub dual_shape: [usize; 2],
    /// Touching tolerance relative to the value scale of `u`.
    pub rel_tol: f64,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions {
            dual_box: None,
            dual_shape: [513, 513],
            rel_tol: 1e-9,
        }
    }
}

/// Lebesgue measure of the subgradient image `du(region)`.
///
/// A raster point `p` belongs to `du(x)` for some node `x` of the region when
/// the sup defining `u*(p)` is attained inside the region, that is when the
/// conjugate over the region nodes matches the full conjugate to `tol`.
pub fn ma_measure(u: &ScalarGrid, region: &ConvexBody2D) -> Result<f64> {
    ma_measure_with(u, region, &MeasureOptions::default())
}

pub fn ma_measure_with(u: &ScalarGrid, region: &ConvexBody2D, opts: &MeasureOptions) -> Result<f64> {
    if u.dim() != 2 {
        return Err(Error::UnsupportedDimension(u.dim()));
    }
    let defect = convexity_defect(u);
    if defect < -1e-9 {
        return Err(Error::NotConvex(format!("second difference {defect:.3e} relative")));
    }
    let inside: Vec<bool> = (0..u.len())
        .map(|i| {
            let x = u.node(&u.multi_index(i));
            region.contains(Point::new(x[0], x[1]))
        })
        .collect();
    if !inside.iter().any(|&b| b) {
        return Ok(0.0);
    }
    let dual_box = match &opts.dual_box {
        Some(b) => b.clone(),
        None => {
            let s = axis_slopes(u);
            let pad = |k: usize| 0.5 * (s[k].1 - s[k].0).max(1e-3) / opts.dual_shape[k] as f64;
            AxisBox::new(
                vec![s[0].0 - pad(0), s[1].0 - pad(1)],
                vec![s[0].1 + pad(0), s[1].1 + pad(1)],
            )?
        }
    };
    let neg_full: Vec<f64> = u.values().iter().map(|v| -v).collect();
    let neg_region: Vec<f64> = u
        .values()
        .iter()
        .zip(&inside)
        .map(|(v, &b)| if b { -v } else { f64::NEG_INFINITY })
        .collect();
    let full = conjugate_raw(u, neg_full, &dual_box, &opts.dual_shape);
    let part = conjugate_raw(u, neg_region, &dual_box, &opts.dual_shape);
    let tol = opts.rel_tol * u.max_abs().max(1.0);
    let hits = full.iter().zip(&part).filter(|(a, b)| **a - **b <= tol).count();
    // each raster point stands for one dual cell
    let cell = (0..2)
        .map(|k| (dual_box.hi[k] - dual_box.lo[k]) / (opts.dual_shape[k] - 1) as f64)
        .product::<f64>();
    Ok(hits as f64 * cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn half_sq(x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn quadratic_is_self_dual() {
        let f = ScalarGrid::square(3.0, 1.0 / 16.0, half_sq).unwrap();
        let u = legendre_transform(&f, &AxisBox::symmetric(2, 2.0).unwrap(), &[33, 33]).unwrap();
        assert!((u.sample_linear(&[1.0, 0.0]).unwrap() - 0.5).abs() < 1.0 / 16.0);
        for i in 0..u.len() {
            let x = u.node(&u.multi_index(i));
            assert!((u.values()[i] - half_sq(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_conjugates_to_ball_indicator() {
        let f = ScalarGrid::square(2.0, 1.0 / 32.0, |x| x[0].hypot(x[1])).unwrap();
        let u = legendre_transform(&f, &AxisBox::symmetric(2, 1.5).unwrap(), &[31, 31]).unwrap();
        assert!(u.sample_linear(&[0.5, 0.0]).unwrap().abs() < 1e-12);
        // outside the unit ball the conjugate grows with the box size
        assert!(u.sample_linear(&[1.5, 0.0]).unwrap() > 0.9);
    }

    #[test]
    fn exponential_conjugate_matches_fine_brute_force() {
        let f = ScalarGrid::from_fn(vec![401], vec![-2.0], vec![0.01], |y| y[0].exp()).unwrap();
        let u = legendre_transform(&f, &AxisBox::new(vec![0.5], vec![1.5]).unwrap(), &[11]).unwrap();
        let fine = ScalarGrid::from_fn(vec![4001], vec![-2.0], vec![0.001], |y| y[0].exp()).unwrap();
        let oracle = conjugate_at(&fine, &[1.0]);
        let got = u.sample_linear(&[1.0]).unwrap();
        assert!((oracle + 1.0).abs() < 1e-5);
        assert!((got - oracle).abs() < 1e-4);
    }

    #[test]
    fn separable_equals_brute_force() {
        let f = ScalarGrid::square(1.0, 0.1, |x| (3.0 * x[0]).sin() + x[1].powi(4) - x[0] * x[1]).unwrap();
        let db = AxisBox::new(vec![-2.0, -1.5], vec![1.0, 2.5]).unwrap();
        let u = legendre_transform(&f, &db, &[9, 13]).unwrap();
        for i in 0..u.len() {
            let x = u.node(&u.multi_index(i));
            assert!((u.values()[i] - conjugate_at(&f, &x)).abs() < 1e-13);
        }
    }

    #[test]
    fn convexify_fixes_convex_input_and_is_idempotent() {
        let f = ScalarGrid::square(1.0, 1.0 / 32.0, half_sq).unwrap();
        let g = convexify(&f).unwrap();
        for (a, b) in f.values().iter().zip(g.values()) {
            assert!((a - b).abs() < 1e-9);
        }
        let wavy = ScalarGrid::square(1.0, 1.0 / 32.0, |x| half_sq(x) + 0.1 * (7.0 * x[0]).cos()).unwrap();
        let once = convexify(&wavy).unwrap();
        let twice = convexify(&once).unwrap();
        for (a, b) in once.values().iter().zip(twice.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in once.values().iter().zip(wavy.values()) {
            assert!(*a <= b + 1e-10);
        }
        assert!(convexity_defect(&once) > -1e-9);
    }

    #[test]
    fn convexify_cosine_matches_lower_hull() {
        let f = ScalarGrid::from_fn(vec![201], vec![-1.0], vec![0.01], |y| (PI * y[0]).cos()).unwrap();
        let g = convexify(&f).unwrap();
        let hull = lower_hull_1d(&f);
        for (a, b) in g.values().iter().zip(&hull) {
            assert!((a - b).abs() < 1e-12);
        }
        let twice = convexify(&g).unwrap();
        for (a, b) in g.values().iter().zip(twice.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn lower_hull_1d(f: &ScalarGrid) -> Vec<f64> {
        let n = f.len();
        let xs: Vec<f64> = (0..n).map(|i| f.coord(0, i)).collect();
        let ys = f.values();
        let mut h: Vec<usize> = Vec::new();
        for i in 0..n {
            while h.len() >= 2 {
                let (a, b) = (h[h.len() - 2], h[h.len() - 1]);
                let cr = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
                if cr <= 0.0 {
                    h.pop();
                } else {
                    break;
                }
            }
            h.push(i);
        }
        (0..n)
            .map(|i| {
                let k = h.partition_point(|&j| j <= i).min(h.len() - 1).max(1);
                let (a, b) = (h[k - 1], h[k]);
                ys[a] + (ys[b] - ys[a]) * (xs[i] - xs[a]) / (xs[b] - xs[a])
            })
            .collect()
    }

    #[test]
    fn identity_gradient_map_measure() {
        let h = 1.0 / 64.0;
        let u = ScalarGrid::square(1.5, h, half_sq).unwrap();
        let disk = ConvexBody2D::regular(256, 1.0);
        let m = ma_measure(&u, &disk).unwrap();
        assert!((m - PI).abs() < 0.05 * PI, "measure {m}");
    }

    #[test]
    fn cone_apex_carries_unit_mass() {
        let h = 1.0 / 64.0;
        let a = PI.powf(-0.5);
        let u = ScalarGrid::square(1.0, h, |x| a * x[0].hypot(x[1])).unwrap();
        let nbhd = ConvexBody2D::regular(16, 1.01 * h);
        let m = ma_measure(&u, &nbhd).unwrap();
        assert!((m - 1.0).abs() < 0.05, "apex mass {m}");
    }

    #[test]
    fn full_region_fills_the_gradient_box() {
        let u = ScalarGrid::square(1.0, 1.0 / 32.0, |x| half_sq(x) + 0.3 * x[0] * x[0]).unwrap();
        let everything = ConvexBody2D::regular(4, 3.0);
        let opts = MeasureOptions::default();
        let m = ma_measure_with(&u, &everything, &opts).unwrap();
        let s = axis_slopes(&u);
        let bx = (s[0].1 - s[0].0) * (s[1].1 - s[1].0);
        assert!((m - bx).abs() < 0.02 * bx, "{m} vs {bx}");
    }

    #[test]
    fn measure_rejects_concave_input() {
        let u = ScalarGrid::square(1.0, 0.1, |x| -half_sq(x)).unwrap();
        let err = ma_measure(&u, &ConvexBody2D::regular(8, 0.5)).unwrap_err();
        assert_eq!(err.token(), "not-convex");
    }

    #[test]
    fn measure_is_additive() {
        let u = ScalarGrid::square(1.5, 1.0 / 32.0, |x| half_sq(x) + 0.1 * x[0].powi(4)).unwrap();
        let left = ConvexBody2D::new(vec![
            Point::new(-1.0, -1.0),
            Point::new(-0.01, -1.0),
            Point::new(-0.01, 1.0),
            Point::new(-1.0, 1.0),
        ])
        .unwrap();
        let right = ConvexBody2D::new(vec![
            Point::new(0.01, -1.0),
            Point::new(1.0, -1.0),
            Point::new(1.0, 1.0),
            Point::new(0.01, 1.0),
        ])
        .unwrap();
        let both = ConvexBody2D::new(vec![
            Point::new(-1.0, -1.0),
            Point::new(1.0, -1.0),
            Point::new(1.0, 1.0),
            Point::new(-1.0, 1.0),
        ])
        .unwrap();
        let opts = MeasureOptions {
            dual_box: Some(AxisBox::symmetric(2, 2.0).unwrap()),
            ..MeasureOptions::default()
        };
        let (a, b, ab) = (
            ma_measure_with(&u, &left, &opts).unwrap(),
            ma_measure_with(&u, &right, &opts).unwrap(),
            ma_measure_with(&u, &both, &opts).unwrap(),
        );
        assert!((ab - a - b).abs() <= 0.05 * ab, "{a} + {b} vs {ab}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn young_inequality(c in 0.2f64..3.0, s in -1.0f64..1.0, seed in 0u64..1000) {
            let f = ScalarGrid::square(1.0, 0.125, |x| c * half_sq(x) + s * x[0] * x[1].powi(3)).unwrap();
            let db = AxisBox::symmetric(2, 2.0).unwrap();
            let u = legendre_transform(&f, &db, &[17, 17]).unwrap();
            let mut k = seed;
            for _ in 0..1000 {
                k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let i = (k >> 33) as usize % f.len();
                let j = (k >> 13) as usize % u.len();
                let y = f.node(&f.multi_index(i));
                let x = u.node(&u.multi_index(j));
                let xy = x[0] * y[0] + x[1] * y[1];
                prop_assert!(f.values()[i] + u.values()[j] >= xy - 1e-9);
            }
        }

        #[test]
        fn conjugation_reverses_order(c in 0.0f64..1.0, shift in 0.0f64..0.5) {
            let f = ScalarGrid::square(1.0, 0.125, |x| half_sq(x) + c * x[0]).unwrap();
            let g = f.map(|x, v| v + shift + 0.2 * x[1] * x[1]).unwrap();
            let db = AxisBox::symmetric(2, 1.5).unwrap();
            let uf = legendre_transform(&f, &db, &[13, 13]).unwrap();
            let ug = legendre_transform(&g, &db, &[13, 13]).unwrap();
            for (a, b) in uf.values().iter().zip(ug.values()) {
                prop_assert!(a >= b);
            }
        }

        #[test]
        fn double_conjugate_close_to_envelope(c in 0.5f64..2.0, w in 0.0f64..0.3) {
            let h = 1.0 / 16.0;
            let f = ScalarGrid::square(1.0, h, |x| c * half_sq(x) + w * (5.0 * x[0]).sin()).unwrap();
            let env = convexify(&f).unwrap();
            let db = AxisBox::symmetric(2, 4.0).unwrap();
            let u = legendre_transform(&f, &db, &[65, 65]).unwrap();
            let back = legendre_transform(&u, &f.bounding_box(), f.shape()).unwrap();
            let s = axis_slopes(&f);
            let lip = s.iter().map(|p| p.0.abs().max(p.1.abs())).fold(0.0, f64::max);
            for (a, b) in back.values().iter().zip(env.values()) {
                prop_assert!((a - b).abs() <= 4.0 * h * lip);
            }
        }
    }
}
