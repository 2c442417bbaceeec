use std::f64::consts::PI;

use mafb::body::{hausdorff, polar_body, Point};
use mafb::cli::pipelines::sampled_radial_dual;
use mafb::dual::{dualize, GDesc};
use mafb::obstacle::{extract_free_boundary, solve_obstacle_with, Field2, ObstacleProblem, SolverOptions};

#[test]
fn exact_radial_dual_lies_above_its_cone() {
    let d = sampled_radial_dual(1.0 / 32.0).unwrap();
    let scale = d.u.max_abs();
    assert!(d.w_min() >= -1e-9 * scale, "w_min = {}", d.w_min());
    assert!((d.c_star - 1.0).abs() <= 0.05, "c* = {}", d.c_star);
    for j in 0..16 {
        let t = 2.0 * PI * j as f64 / 16.0;
        let ray = Point::new(t.cos(), t.sin());
        let samples: Vec<f64> = (1..=40)
            .map(|k| {
                let r = 0.03 * k as f64;
                d.w.sample_cubic(&[r * ray.x, r * ray.y]).unwrap()
            })
            .collect();
        assert!(samples.windows(2).all(|p| p[1] >= p[0] - 1e-9 * scale), "ray {j}: {samples:?}");
    }
}

#[test]
fn section_of_the_exact_cone_is_the_polar_of_the_contact_set() {
    let d = sampled_radial_dual(1.0 / 32.0).unwrap();
    let section = d.phi.section().unwrap();
    let polar = polar_body(&d.contact).unwrap();
    let e = hausdorff(&section.vertices, &polar.vertices);
    assert!(e <= 1e-4, "distance {e}");
}

#[test]
fn pipeline_dual_matches_the_contact_set() {
    let h = 1.0 / 32.0;
    let p = ObstacleProblem::radial(h);
    let v = solve_obstacle_with(&p, &SolverOptions::default()).unwrap().v;
    let fb = extract_free_boundary(&v, h).unwrap();
    let d = dualize(&v, &fb.contact_set, GDesc::unit()).unwrap();
    // the kappa h^2 contour encloses the true unit-area contact set
    assert!((d.c_star - 1.0).abs() <= 0.05, "c* = {}", d.c_star);
    assert!(d.contact_area >= d.c_star, "contour area {} below c* = {}", d.contact_area, d.c_star);
    let e = hausdorff(&d.phi.section().unwrap().vertices, &polar_body(&fb.contact_set).unwrap().vertices);
    assert!(e <= 2.0 * h, "duality distance {e}");
}

#[test]
fn no_contact_gives_no_point_mass() {
    let p = ObstacleProblem {
        half_width: 1.0,
        h: 1.0 / 32.0,
        source: Field2::Const(1.0),
        boundary: Field2::Quadratic { c: 0.1 },
    };
    let v = solve_obstacle_with(&p, &SolverOptions::default()).unwrap().v;
    let fb = extract_free_boundary(&v, p.h).unwrap();
    let d = dualize(&v, &fb.contact_set, GDesc::unit()).unwrap();
    assert!(d.phi.is_zero());
    assert!(d.c_star <= p.h * p.h, "c* = {}", d.c_star);
    let x = [0.25, -0.125];
    let expected = 0.5 * (x[0] * x[0] + x[1] * x[1]);
    assert!((d.u.sample_linear(&x).unwrap() - expected).abs() <= 1e-6);
}
