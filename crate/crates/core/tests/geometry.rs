use std::f64::consts::PI;

use mafb::body::{circle_directions, convex_hull, hausdorff, polar_body, support_cone, ConvexBody2D, Point};
use mafb::dual::CONE_DIRECTIONS;
use proptest::prelude::*;

/// A convex polygon from twelve jittered rays, or `None` when a corner is
/// too flat for the sampled cone to resolve.
fn polygon(radii: &[f64], jitter: &[f64]) -> Option<ConvexBody2D> {
    let pts: Vec<Point> = radii
        .iter()
        .zip(jitter)
        .enumerate()
        .map(|(k, (r, j))| {
            let t = 2.0 * PI * (k as f64 + j) / 12.0;
            Point::new(r * t.cos(), r * t.sin())
        })
        .collect();
    let k = convex_hull(&pts);
    let v = &k.vertices;
    let m = v.len();
    let min_turn = (0..m)
        .map(|i| {
            let a = v[(i + m - 1) % m];
            let (b, c) = (v[i], v[(i + 1) % m]);
            let (e1, e2) = (b.sub(a), c.sub(b));
            (e1.x * e2.y - e1.y * e2.x).atan2(e1.dot(e2))
        })
        .fold(f64::INFINITY, f64::min);
    (min_turn > 3f64.to_radians()).then_some(k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn section_of_support_cone_is_the_polar_body(
        radii in proptest::collection::vec(0.5f64..1.5, 12),
        jitter in proptest::collection::vec(-0.3f64..0.3, 12),
    ) {
        let k = match polygon(&radii, &jitter) {
            Some(k) => k,
            None => return Ok(()),
        };
        let cone = support_cone(&k, &circle_directions(CONE_DIRECTIONS)).unwrap();
        let section = cone.section().unwrap();
        let polar = polar_body(&k).unwrap();
        let d = hausdorff(&section.vertices, &polar.vertices);
        prop_assert!(d <= 1e-6, "hausdorff {d}, {} vs {} vertices", section.vertices.len(), polar.vertices.len());
    }

    #[test]
    fn polar_is_an_involution(
        radii in proptest::collection::vec(0.5f64..1.5, 12),
        jitter in proptest::collection::vec(-0.3f64..0.3, 12),
    ) {
        let k = convex_hull(
            &radii
                .iter()
                .zip(&jitter)
                .enumerate()
                .map(|(i, (r, j))| {
                    let t = 2.0 * PI * (i as f64 + j) / 12.0;
                    Point::new(r * t.cos(), r * t.sin())
                })
                .collect::<Vec<_>>(),
        );
        let back = polar_body(&polar_body(&k).unwrap()).unwrap();
        prop_assert!(hausdorff(&back.vertices, &k.vertices) <= 1e-12);
    }

    #[test]
    fn support_of_the_polar_is_the_gauge(
        radii in proptest::collection::vec(0.5f64..1.5, 12),
        angle in 0.0f64..(2.0 * PI),
    ) {
        let k = convex_hull(
            &radii
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let t = 2.0 * PI * i as f64 / 12.0;
                    Point::new(r * t.cos(), r * t.sin())
                })
                .collect::<Vec<_>>(),
        );
        let polar = polar_body(&k).unwrap();
        // the boundary point of K in direction d has gauge 1, so
        // h_{K polar}(d) = 1 / rho_K(d)
        let d = Point::new(angle.cos(), angle.sin());
        let mut lo = 0.0;
        let mut hi = 2.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if k.contains(d.scale(mid)) { lo = mid } else { hi = mid }
        }
        prop_assert!((polar.support(d) * lo - 1.0).abs() <= 1e-9);
    }
}
