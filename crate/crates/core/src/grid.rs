//! Uniform axis-aligned sampled fields and the `mafb-grid v1` text format.
//!
//! A [`ScalarGrid`] stores values row-major with the last axis fastest. Node
//! `(i_0, .., i_{d-1})` sits at `origin[k] + i_k * spacing[k]`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    shape: Vec<usize>,
    origin: Vec<f64>,
    spacing: Vec<f64>,
    values: Vec<f64>,
}

/// Axis-aligned box `[lo_k, hi_k]` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::EmptyBox("dimension mismatch".into()));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::EmptyBox(format!("[{a}, {b}]")));
            }
        }
        Ok(AxisBox { lo, hi })
    }

    /// The symmetric box `[-r, r]^dim`.
    pub fn symmetric(dim: usize, r: f64) -> Result<Self> {
        AxisBox::new(vec![-r; dim], vec![r; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

impl ScalarGrid {
    pub fn new(
        shape: Vec<usize>,
        origin: Vec<f64>,
        spacing: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let dim = shape.len();
        if !(1..=4).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim}")));
        }
        if origin.len() != dim || spacing.len() != dim {
            return Err(Error::InvalidGrid("axis metadata length mismatch".into()));
        }
        if shape.iter().any(|&k| k < 2) {
            return Err(Error::InvalidGrid(format!("shape {shape:?} has an axis below 2")));
        }
        if spacing.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidGrid(format!("spacing {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid(format!("origin {origin:?}")));
        }
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(Error::InvalidGrid(format!(
                "expected {n} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("value at flat index {i}")));
        }
        Ok(ScalarGrid {
            shape,
            origin,
            spacing,
            values,
        })
    }

    /// Samples `f` at every node.
    pub fn from_fn(
        shape: Vec<usize>,
        origin: Vec<f64>,
        spacing: Vec<f64>,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let n: usize = shape.iter().product();
        let mut values = Vec::with_capacity(n);
        let mut x = vec![0.0; shape.len()];
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..n {
            for k in 0..shape.len() {
                x[k] = origin[k] + idx[k] as f64 * spacing[k];
            }
            values.push(f(&x));
            for k in (0..shape.len()).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        ScalarGrid::new(shape, origin, spacing, values)
    }

    /// Grid covering `bx` with `shape[k]` nodes per axis (endpoints included).
    pub fn over_box(bx: &AxisBox, shape: &[usize], f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        if shape.len() != bx.dim() || shape.iter().any(|&k| k < 2) {
            return Err(Error::InvalidGrid(format!("shape {shape:?} for box")));
        }
        let spacing = (0..bx.dim())
            .map(|k| (bx.hi[k] - bx.lo[k]) / (shape[k] - 1) as f64)
            .collect();
        ScalarGrid::from_fn(shape.to_vec(), bx.lo.clone(), spacing, f)
    }

    /// Square 2-D grid on `[-l, l]^2` with spacing `h`.
    pub fn square(l: f64, h: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let n = (2.0 * l / h).round() as usize + 1;
        ScalarGrid::from_fn(vec![n, n], vec![-l, -l], vec![h, h], f)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mutable access; callers must keep values finite.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn bounding_box(&self) -> AxisBox {
        let hi = (0..self.dim())
            .map(|k| self.origin[k] + (self.shape[k] - 1) as f64 * self.spacing[k])
            .collect();
        AxisBox {
            lo: self.origin.clone(),
            hi,
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.shape[k];
            flat /= self.shape[k];
        }
        idx
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing[axis]
    }

    pub fn node(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(k, &i)| self.coord(k, i))
            .collect()
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let f = self.flat_index(idx);
        self.values[f] = v;
    }

    /// 2-D accessor `(i, j)` with `j` the fast axis.
    #[inline]
    pub fn at2(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.shape[1] + j]
    }

    /// Same geometry, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        ScalarGrid::new(
            self.shape.clone(),
            self.origin.clone(),
            self.spacing.clone(),
            values,
        )
    }

    pub fn map(&self, f: impl Fn(&[f64], f64) -> f64) -> Result<Self> {
        let values = (0..self.len())
            .map(|i| {
                let x = self.node(&self.multi_index(i));
                f(&x, self.values[i])
            })
            .collect();
        self.with_values(values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Fractional index of `x` along every axis, `None` outside the grid.
    fn locate(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut t = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let s = (x[k] - self.origin[k]) / self.spacing[k];
            let top = (self.shape[k] - 1) as f64;
            if !(s >= -1e-9 && s <= top + 1e-9) {
                return None;
            }
            t.push(s.clamp(0.0, top));
        }
        Some(t)
    }

    /// Multilinear interpolation; `None` outside the grid.
    pub fn sample_linear(&self, x: &[f64]) -> Option<f64> {
        let t = self.locate(x)?;
        let d = self.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for k in 0..d {
            let i = (t[k].floor() as usize).min(self.shape[k] - 2);
            base[k] = i;
            frac[k] = t[k] - i as f64;
        }
        let mut acc = 0.0;
        let mut idx = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for k in 0..d {
                let bit = (corner >> k) & 1;
                idx[k] = base[k] + bit;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            if w != 0.0 {
                acc += w * self.get(&idx);
            }
        }
        Some(acc)
    }

    /// Tensor cubic-convolution (Catmull-Rom) interpolation in 2-D. Near the
    /// edge the stencil falls back to [`ScalarGrid::sample_linear`].
    pub fn sample_cubic(&self, x: &[f64]) -> Option<f64> {
        if self.dim() != 2 {
            return self.sample_linear(x);
        }
        let t = self.locate(x)?;
        let mut base = [0isize; 2];
        let mut frac = [0.0; 2];
        for k in 0..2 {
            let i = (t[k].floor() as usize).min(self.shape[k] - 2);
            base[k] = i as isize;
            frac[k] = t[k] - i as f64;
            if i < 1 || i + 2 >= self.shape[k] {
                return self.sample_linear(x);
            }
        }
        let wx = catmull_rom(frac[0]);
        let wy = catmull_rom(frac[1]);
        let mut acc = 0.0;
        for (a, wa) in wx.iter().enumerate() {
            let i = (base[0] - 1 + a as isize) as usize;
            let mut row = 0.0;
            for (b, wb) in wy.iter().enumerate() {
                let j = (base[1] - 1 + b as isize) as usize;
                row += wb * self.at2(i, j);
            }
            acc += wa * row;
        }
        Some(acc)
    }

    /// Serializes to `mafb-grid v1`.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.len() * 24 + 128);
        s.push_str("# mafb-grid v1\n");
        let _ = writeln!(s, "dim {}", self.dim());
        let join = |v: &mut String, key: &str, items: Vec<String>| {
            let _ = writeln!(v, "{key} {}", items.join(" "));
        };
        join(&mut s, "shape", self.shape.iter().map(|k| k.to_string()).collect());
        join(&mut s, "origin", self.origin.iter().map(|v| fmt17(*v)).collect());
        join(&mut s, "spacing", self.spacing.iter().map(|v| fmt17(*v)).collect());
        for v in &self.values {
            s.push_str(&fmt17(*v));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let magic = lines.next().unwrap_or_default().trim();
        if magic != "# mafb-grid v1" {
            return Err(Error::Parse(format!("bad magic line {magic:?}")));
        }
        let mut header = |key: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing `{key}` line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(Error::Parse(format!("expected `{key}`, got {line:?}")));
            }
            Ok(parts.map(str::to_string).collect())
        };
        let dim: usize = parse_one(&header("dim")?)?;
        let shape: Vec<usize> = parse_all(&header("shape")?)?;
        let origin: Vec<f64> = parse_all(&header("origin")?)?;
        let spacing: Vec<f64> = parse_all(&header("spacing")?)?;
        if shape.len() != dim {
            return Err(Error::Parse(format!("dim {dim} but shape {shape:?}")));
        }
        let values = lines
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("value {l:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        ScalarGrid::new(shape, origin, spacing, values)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ScalarGrid::parse(&text)
    }
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

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_one<T: std::str::FromStr>(items: &[String]) -> Result<T> {
    match items {
        [one] => one
            .parse()
            .map_err(|_| Error::Parse(format!("cannot parse {one:?}"))),
        _ => Err(Error::Parse(format!("expected one item, got {items:?}"))),
    }
}

fn parse_all<T: std::str::FromStr>(items: &[String]) -> Result<Vec<T>> {
    items
        .iter()
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Parse(format!("cannot parse {s:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_degenerate_axes() {
        assert!(ScalarGrid::new(vec![1, 3], vec![0.0; 2], vec![1.0; 2], vec![0.0; 3]).is_err());
        assert!(ScalarGrid::new(vec![2, 2], vec![0.0; 2], vec![0.0, 1.0], vec![0.0; 4]).is_err());
        let e = ScalarGrid::new(vec![2], vec![0.0], vec![1.0], vec![0.0, f64::NAN]).unwrap_err();
        assert_eq!(e.token(), "non-finite");
    }

    #[test]
    fn linear_and_cubic_reproduce_low_degree() {
        let g = ScalarGrid::square(1.0, 0.125, |x| 2.0 * x[0] - x[1] + 0.5).unwrap();
        let v = g.sample_linear(&[0.3, -0.41]).unwrap();
        assert!((v - (0.6 + 0.41 + 0.5)).abs() < 1e-14);
        let q = ScalarGrid::square(1.0, 0.125, |x| x[0] * x[0] + x[0] * x[1]).unwrap();
        let c = q.sample_cubic(&[0.31, -0.17]).unwrap();
        assert!((c - (0.31 * 0.31 - 0.31 * 0.17)).abs() < 1e-12);
        assert!(g.sample_linear(&[1.5, 0.0]).is_none());
    }

    #[test]
    fn header_layout() {
        let g = ScalarGrid::from_fn(vec![2, 3], vec![0.0, -1.0], vec![0.5, 0.25], |x| x[0] + x[1])
            .unwrap();
        let text = g.to_text();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# mafb-grid v1"));
        assert_eq!(lines.next(), Some("dim 2"));
        assert_eq!(lines.next(), Some("shape 2 3"));
        assert!(lines.next().unwrap().starts_with("origin 0.0000000000000000e0"));
        // last axis fastest: node (0,1) is the second value
        let vals: Vec<f64> = text.lines().skip(5).map(|l| l.parse().unwrap()).collect();
        assert_eq!(vals[1], -0.75);
        assert!(ScalarGrid::parse("# other\n").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip_is_bit_exact(vals in proptest::collection::vec(-1e300f64..1e300, 6)) {
            let g = ScalarGrid::new(vec![3, 2], vec![-0.1, 3.0], vec![0.7, 1e-3], vals).unwrap();
            let back = ScalarGrid::parse(&g.to_text()).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
