//! Planar convex bodies: hulls, polars, support functions and contours.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::ScalarGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex polygon with counterclockwise vertices, or the empty body.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexBody2D {
    pub vertices: Vec<Point>,
}

/// Tolerance on the cross product of consecutive normalized edges.
pub const CONVEXITY_TOL: f64 = 1e-12;

impl ConvexBody2D {
    pub fn empty() -> Self {
        ConvexBody2D {
            vertices: Vec::new(),
        }
    }

    /// Validates convexity, orientation and positive area.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::NonFinite("polygon vertex".into()));
        }
        if vertices.len() < 3 {
            return Err(Error::NotConvex("fewer than three vertices".into()));
        }
        let body = ConvexBody2D { vertices };
        if body.area() <= 0.0 {
            return Err(Error::NotConvex("non-positive area".into()));
        }
        let n = body.vertices.len();
        for i in 0..n {
            let a = body.vertices[i];
            let b = body.vertices[(i + 1) % n];
            let c = body.vertices[(i + 2) % n];
            let e1 = b.sub(a);
            let e2 = c.sub(b);
            let (l1, l2) = (e1.norm(), e2.norm());
            if l1 == 0.0 || l2 == 0.0 {
                return Err(Error::NotConvex("repeated vertex".into()));
            }
            let z = (e1.x * e2.y - e1.y * e2.x) / (l1 * l2);
            if z < -CONVEXITY_TOL {
                return Err(Error::NotConvex(format!("reflex turn at vertex {}", (i + 1) % n)));
            }
        }
        Ok(body)
    }

    /// Regular `m`-gon of circumradius `r` centred at the origin.
    pub fn regular(m: usize, r: f64) -> Self {
        let vertices = (0..m)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                Point::new(r * t.cos(), r * t.sin())
            })
            .collect();
        ConvexBody2D { vertices }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        0.5 * (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
    }

    pub fn contains(&self, p: Point) -> bool {
        let n = self.vertices.len();
        n >= 3
            && (0..n).all(|i| cross(self.vertices[i], self.vertices[(i + 1) % n], p) >= -1e-14)
    }

    /// True when the origin lies strictly inside.
    pub fn origin_interior(&self) -> bool {
        let n = self.vertices.len();
        let o = Point::new(0.0, 0.0);
        n >= 3 && (0..n).all(|i| cross(self.vertices[i], self.vertices[(i + 1) % n], o) > 0.0)
    }

    pub fn support(&self, dir: Point) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.dot(dir))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Distance from `p` to the boundary polygon.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        closed_polyline_distance(&self.vertices, p)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            s.push_str(&format!("{},{}\n", crate::grid::fmt17(v.x), crate::grid::fmt17(v.y)));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let pts = parse_points(text)?;
        if pts.is_empty() {
            return Ok(ConvexBody2D::empty());
        }
        ConvexBody2D::new(pts)
    }
}

pub fn parse_points(text: &str) -> Result<Vec<Point>> {
    let mut pts = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let mut it = line.split(',').map(|t| t.trim().parse::<f64>());
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(x)), Some(Ok(y)), None) => pts.push(Point::new(x, y)),
            _ => return Err(Error::Parse(format!("line {}: expected `x,y`", ln + 1))),
        }
    }
    Ok(pts)
}

pub fn points_to_csv(pts: &[Point]) -> String {
    pts.iter()
        .map(|p| format!("{},{}\n", crate::grid::fmt17(p.x), crate::grid::fmt17(p.y)))
        .collect()
}

/// Convex hull by Andrew's monotone chain, counterclockwise, collinear
/// points dropped.
pub fn convex_hull(points: &[Point]) -> ConvexBody2D {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return ConvexBody2D::empty();
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        return ConvexBody2D::empty();
    }
    ConvexBody2D { vertices: hull }
}

fn segment_distance(a: Point, b: Point, p: Point) -> f64 {
    let ab = b.sub(a);
    let l2 = ab.dot(ab);
    let t = if l2 == 0.0 {
        0.0
    } else {
        (p.sub(a).dot(ab) / l2).clamp(0.0, 1.0)
    };
    p.sub(a.sub(ab.scale(-t))).norm()
}

fn closed_polyline_distance(poly: &[Point], p: Point) -> f64 {
    let n = poly.len();
    match n {
        0 => f64::INFINITY,
        1 => p.sub(poly[0]).norm(),
        _ => (0..n)
            .map(|i| segment_distance(poly[i], poly[(i + 1) % n], p))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Hausdorff distance between two closed polylines, measured from the
/// vertices of each to the edges of the other.
pub fn hausdorff(a: &[Point], b: &[Point]) -> f64 {
    let one = |x: &[Point], y: &[Point]| {
        x.iter()
            .map(|&p| closed_polyline_distance(y, p))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

/// Hausdorff distance between a closed polyline and the circle `|x| = r`.
pub fn hausdorff_to_circle(poly: &[Point], r: f64) -> f64 {
    if poly.is_empty() {
        return f64::INFINITY;
    }
    let from_poly = poly.iter().map(|p| (p.norm() - r).abs()).fold(0.0, f64::max);
    let circle: Vec<Point> = (0..4096)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / 4096.0;
            Point::new(r * t.cos(), r * t.sin())
        })
        .collect();
    let from_circle = circle
        .iter()
        .map(|&p| closed_polyline_distance(poly, p))
        .fold(0.0, f64::max);
    from_poly.max(from_circle)
}

/// Polar body `{x : x . y <= 1 for all y in K}`; one vertex per edge of `K`.
pub fn polar_body(k: &ConvexBody2D) -> Result<ConvexBody2D> {
    if k.is_empty() {
        return Err(Error::EmptyBody);
    }
    let hull = convex_hull(&k.vertices);
    if !hull.origin_interior() {
        return Err(Error::OriginNotInterior);
    }
    let n = hull.vertices.len();
    let vertices = (0..n)
        .map(|i| {
            let a = hull.vertices[i];
            let b = hull.vertices[(i + 1) % n];
            // solve x . a = 1, x . b = 1
            let det = a.x * b.y - a.y * b.x;
            Point::new((b.y - a.y) / det, (a.x - b.x) / det)
        })
        .collect();
    Ok(ConvexBody2D { vertices })
}

/// Sampled tangent cone: support function values on unit directions.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportCone {
    pub directions: Vec<Point>,
    pub values: Vec<f64>,
}

/// `m` equally spaced unit directions starting at angle 0.
pub fn circle_directions(m: usize) -> Vec<Point> {
    (0..m)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
            Point::new(t.cos(), t.sin())
        })
        .collect()
}

pub fn support_cone(k: &ConvexBody2D, directions: &[Point]) -> Result<SupportCone> {
    if k.is_empty() {
        return Err(Error::EmptyBody);
    }
    if !k.origin_interior() {
        return Err(Error::OriginNotInterior);
    }
    Ok(SupportCone {
        directions: directions.to_vec(),
        values: directions.iter().map(|&d| k.support(d)).collect(),
    })
}

impl SupportCone {
    /// The zero cone, used when the contact set is empty.
    pub fn zero(directions: &[Point]) -> Self {
        SupportCone {
            directions: directions.to_vec(),
            values: vec![0.0; directions.len()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Evaluates `|x| phi(x / |x|)` by interpolating the one-homogeneous
    /// extension between the two sampled directions bracketing `x`.
    pub fn eval(&self, x: Point) -> f64 {
        let r = x.norm();
        if r == 0.0 || self.is_zero() {
            return 0.0;
        }
        // phi is piecewise linear in x between bracketing sample rays:
        // write x = s d_j + t d_{j+1} and interpolate the values linearly.
        let (j, k) = self.bracket(x);
        let (a, b) = (self.directions[j], self.directions[k]);
        let det = a.x * b.y - a.y * b.x;
        if det.abs() < 1e-300 {
            return r * self.values[j];
        }
        let s = (x.x * b.y - x.y * b.x) / det;
        let t = (a.x * x.y - a.y * x.x) / det;
        s * self.values[j] + t * self.values[k]
    }

    fn bracket(&self, x: Point) -> (usize, usize) {
        let ang = |p: Point| p.y.atan2(p.x).rem_euclid(2.0 * std::f64::consts::PI);
        let t = ang(x);
        let m = self.directions.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| ang(self.directions[i]).total_cmp(&ang(self.directions[j])));
        let pos = order.partition_point(|&i| ang(self.directions[i]) <= t);
        let hi = order[pos % m];
        let lo = order[(pos + m - 1) % m];
        (lo, hi)
    }

    /// Points `theta_j / phi(theta_j)` on the boundary of the unit section.
    pub fn section_points(&self) -> Vec<Point> {
        self.directions
            .iter()
            .zip(&self.values)
            .map(|(&d, &v)| d.scale(1.0 / v))
            .collect()
    }

    /// Section `{phi < 1}` reconstructed from the samples. Chords between
    /// angular neighbours that have a collinear neighbour lie on an edge and
    /// are kept; a chord cutting a corner next to such an edge is replaced
    /// by the intersection of the two adjacent chord lines. Where the cone is
    /// linear over its samples this recovers the section exactly; otherwise
    /// the result is the polygon through the samples.
    pub fn section(&self) -> Result<ConvexBody2D> {
        if self.values.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::OriginNotInterior);
        }
        let ang = |p: Point| p.y.atan2(p.x).rem_euclid(2.0 * std::f64::consts::PI);
        let mut pts = self.section_points();
        pts.sort_by(|a, b| ang(*a).total_cmp(&ang(*b)));
        pts.dedup();
        let m = pts.len();
        if m < 3 {
            return Err(Error::EmptyBody);
        }
        let scale = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let tol = 1e-11 * scale;
        // chord i joins pts[i] and pts[i + 1]; line is n . x = c
        let lines: Vec<(Point, f64)> = (0..m)
            .map(|i| {
                let (a, b) = (pts[i], pts[(i + 1) % m]);
                let e = b.sub(a);
                let len = e.norm();
                let nrm = Point::new(e.y / len, -e.x / len);
                (nrm, nrm.dot(a))
            })
            .collect();
        let on_edge: Vec<bool> = (0..m)
            .map(|i| {
                let (nrm, c) = lines[i];
                let prev = pts[(i + m - 1) % m];
                let next = pts[(i + 2) % m];
                (nrm.dot(prev) - c).abs() <= tol || (nrm.dot(next) - c).abs() <= tol
            })
            .collect();
        let mut vertices = Vec::with_capacity(m);
        for i in 0..m {
            vertices.push(pts[i]);
            let (ip, inx) = ((i + m - 1) % m, (i + 1) % m);
            if on_edge[i] || !(on_edge[ip] || on_edge[inx]) {
                continue;
            }
            let ((n1, c1), (n2, c2)) = (lines[ip], lines[inx]);
            let det = n1.x * n2.y - n1.y * n2.x;
            if det.abs() <= 1e-12 {
                continue;
            }
            let x = Point::new((c1 * n2.y - c2 * n1.y) / det, (n1.x * c2 - n2.x * c1) / det);
            let (nrm, c) = lines[i];
            if nrm.dot(x) > c + tol && x.norm() <= 4.0 * scale {
                vertices.push(x);
            }
        }
        Ok(convex_hull(&vertices))
    }
}

/// Closed contours of `{g = level}` on a 2-D grid by marching squares.
/// Saddle cells are resolved by the cell-centre average. Open contours that
/// reach the grid edge are returned unclosed.
pub fn marching_squares(g: &ScalarGrid, level: f64) -> Vec<Vec<Point>> {
    let (nx, ny) = (g.shape()[0], g.shape()[1]);
    let val = |i: usize, j: usize| g.at2(i, j) - level;
    // edge key: (i, j, horizontal?) for the edge from (i,j) to (i+1,j) or (i,j+1)
    type Key = (usize, usize, bool);
    let point_on = |k: Key| -> Point {
        let (i, j, along_i) = k;
        let (i2, j2) = if along_i { (i + 1, j) } else { (i, j + 1) };
        let (a, b) = (val(i, j), val(i2, j2));
        let t = a / (a - b);
        let x0 = g.coord(0, i);
        let y0 = g.coord(1, j);
        let x1 = g.coord(0, i2);
        let y1 = g.coord(1, j2);
        Point::new(x0 + t * (x1 - x0), y0 + t * (y1 - y0))
    };
    let mut segs: Vec<(Key, Key)> = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let c = [val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)];
            let above: Vec<bool> = c.iter().map(|&x| x > 0.0).collect();
            // cell edges in ccw order: bottom, right, top, left
            let edges: [Key; 4] = [(i, j, true), (i + 1, j, false), (i, j + 1, true), (i, j, false)];
            let crossing: Vec<usize> = (0..4).filter(|&e| above[e] != above[(e + 1) % 4]).collect();
            match crossing.len() {
                2 => segs.push((edges[crossing[0]], edges[crossing[1]])),
                4 => {
                    let centre = c.iter().sum::<f64>() / 4.0 > 0.0;
                    // join the crossings that keep the centre's side connected
                    if centre == above[0] {
                        segs.push((edges[0], edges[1]));
                        segs.push((edges[2], edges[3]));
                    } else {
                        segs.push((edges[3], edges[0]));
                        segs.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }
    let mut adj: HashMap<Key, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segs.iter().enumerate() {
        adj.entry(a).or_default().push(s);
        adj.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segs.len()];
    let mut out = Vec::new();
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        // walk backwards to an open end if there is one
        let mut chain: Vec<Key> = vec![segs[start].0, segs[start].1];
        used[start] = true;
        for dir in 0..2 {
            loop {
                let tip = *chain.last().unwrap();
                let next = adj[&tip].iter().copied().find(|&s| !used[s]);
                match next {
                    Some(s) => {
                        used[s] = true;
                        let (a, b) = segs[s];
                        chain.push(if a == tip { b } else { a });
                    }
                    None => break,
                }
            }
            if dir == 0 {
                chain.reverse();
            }
        }
        if chain.len() > 1 && chain.first() == chain.last() {
            chain.pop();
        }
        let mut pts: Vec<Point> = chain.into_iter().map(point_on).collect();
        pts.dedup_by(|a, b| a.sub(*b).norm() < 1e-15);
        out.push(pts);
    }
    // keys are visited in a fixed order, so the output is deterministic
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_reflex_polygon() {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(1.0, 0.5),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
        ];
        assert_eq!(ConvexBody2D::new(pts).unwrap_err().token(), "not-convex");
    }

    #[test]
    fn disk_polar_has_reciprocal_radius() {
        let a = PI.powf(-0.5);
        let k = ConvexBody2D::regular(64, a);
        let p = polar_body(&k).unwrap();
        // polar of an inscribed m-gon is a circumscribed m-gon of the 1/a disk
        for v in &p.vertices {
            assert!((v.norm() - PI.sqrt()).abs() < 1e-2);
        }
        assert!(hausdorff_to_circle(&p.vertices, PI.sqrt()) < 3e-3);
    }

    #[test]
    fn square_polar_is_cross_polytope() {
        let sq = ConvexBody2D::new(vec![
            Point::new(-1.0, -1.0),
            Point::new(1.0, -1.0),
            Point::new(1.0, 1.0),
            Point::new(-1.0, 1.0),
        ])
        .unwrap();
        let p = polar_body(&sq).unwrap();
        let expect = [
            Point::new(0.0, -1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(-1.0, 0.0),
        ];
        assert!(hausdorff(&p.vertices, &expect) < 1e-14);
        assert!((p.area() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn origin_outside_is_rejected() {
        let k = ConvexBody2D::new(vec![
            Point::new(1.0, 1.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 2.0),
        ])
        .unwrap();
        assert_eq!(polar_body(&k).unwrap_err().token(), "origin-not-interior");
    }

    #[test]
    fn square_support_cone() {
        let sq = ConvexBody2D::regular(4, 2f64.sqrt());
        let dirs = circle_directions(37);
        let cone = support_cone(&sq, &dirs).unwrap();
        for (d, v) in dirs.iter().zip(&cone.values) {
            // the 45-degree-rotated square [-1,1]^2
            let rot = Point::new((d.x - d.y) / 2f64.sqrt(), (d.x + d.y) / 2f64.sqrt());
            assert!((v - (rot.x.abs() + rot.y.abs())).abs() < 1e-14);
        }
    }

    #[test]
    fn marching_squares_traces_a_circle() {
        let g = ScalarGrid::square(1.0, 1.0 / 32.0, |x| x[0] * x[0] + x[1] * x[1]).unwrap();
        let cs = marching_squares(&g, 0.25);
        assert_eq!(cs.len(), 1);
        assert!(hausdorff_to_circle(&cs[0], 0.5) < 2e-3);
        let hull = convex_hull(&cs[0]);
        assert!((hull.area() - PI / 4.0).abs() < 5e-3);
    }

    #[test]
    fn csv_round_trip() {
        let k = ConvexBody2D::regular(7, 0.3);
        let back = ConvexBody2D::parse_csv(&k.to_csv()).unwrap();
        assert_eq!(k, back);
    }
}
