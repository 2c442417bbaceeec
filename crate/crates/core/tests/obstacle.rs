use mafb::body::{hausdorff, hausdorff_to_circle};
use mafb::obstacle::{
    direction_pairs, extract_free_boundary, extract_free_boundary_at, solve_obstacle_with, Field2, ObstacleProblem,
    SolverOptions,
};
use mafb::radial::RadialBenchmark;

fn problem(h: f64, source: Field2, boundary: Field2) -> ObstacleProblem {
    ObstacleProblem {
        half_width: 2.0,
        h,
        source,
        boundary,
    }
}

fn solve(p: &ObstacleProblem) -> mafb::grid::ScalarGrid {
    solve_obstacle_with(p, &SolverOptions::default()).unwrap().v
}

#[test]
fn scaling_source_and_data_doubles_the_solution() {
    let h = 1.0 / 16.0;
    let v1 = solve(&problem(h, Field2::Const(1.0), Field2::Radial { scale: 1.0 }));
    let v4 = solve(&problem(h, Field2::Const(4.0), Field2::Radial { scale: 2.0 }));
    let scale = v1.max_abs();
    let gap = v1
        .values()
        .iter()
        .zip(v4.values())
        .map(|(a, b)| (2.0 * a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap <= 1e-6 * scale, "max |2 v1 - v4| = {gap}");
    let level = 4.0 * h * h;
    let g1 = extract_free_boundary_at(&v1, level).unwrap();
    let g4 = extract_free_boundary_at(&v4, 2.0 * level).unwrap();
    let d = hausdorff(&g1.polyline, &g4.polyline);
    assert!(d <= 1e-3 * h, "contact sets differ by {d}");
}

#[test]
fn larger_source_gives_smaller_solution() {
    let h = 1.0 / 16.0;
    let v1 = solve(&problem(h, Field2::Const(1.0), Field2::Radial { scale: 1.0 }));
    let v2 = solve(&problem(
        h,
        Field2::custom(|x| 1.0 + 0.5 * x[0] * x[0]),
        Field2::Radial { scale: 1.0 },
    ));
    let worst = v2
        .values()
        .iter()
        .zip(v1.values())
        .map(|(b, a)| b - a)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(worst <= 1e-6, "v2 - v1 reaches {worst}");
    let a1 = extract_free_boundary(&v1, h).unwrap().contact_set.area();
    let a2 = extract_free_boundary(&v2, h).unwrap().contact_set.area();
    assert!(a2 >= a1 - 1e-9, "contact area {a2} < {a1}");
}

#[test]
fn quadratic_data_has_no_contact() {
    let p = ObstacleProblem {
        half_width: 1.0,
        h: 1.0 / 16.0,
        source: Field2::Const(1.0),
        boundary: Field2::Quadratic { c: 0.1 },
    };
    let v = solve(&p);
    let err = v
        .values()
        .iter()
        .enumerate()
        .map(|(k, &val)| {
            let x = v.node(&v.multi_index(k));
            (val - p.boundary.eval(&x)).abs()
        })
        .fold(0.0, f64::max);
    assert!(err <= 1e-6, "max error {err}");
    let fb = extract_free_boundary(&v, p.h).unwrap();
    assert!(fb.is_empty() && fb.contact_set.is_empty());
}

#[test]
fn solution_is_nonnegative_and_convex_along_the_stencil() {
    let h = 1.0 / 16.0;
    let v = solve(&problem(h, Field2::Const(1.0), Field2::Radial { scale: 1.0 }));
    let n = v.shape()[0] as isize;
    let tol = 1e-9 * v.max_abs();
    assert!(v.values().iter().all(|&x| x >= -tol));
    for d in direction_pairs(3).into_iter().flat_map(|(e, f)| [e, f]) {
        for i in 0..n {
            for j in 0..n {
                let (a, b) = ((i - d[0], j - d[1]), (i + d[0], j + d[1]));
                let inside = |(x, y): (isize, isize)| (0..n).contains(&x) && (0..n).contains(&y);
                if !(inside(a) && inside(b)) {
                    continue;
                }
                let at = |(x, y): (isize, isize)| v.at2(x as usize, y as usize);
                let second = at(a) + at(b) - 2.0 * at((i, j));
                assert!(second >= -tol, "second difference {second} along {d:?} at ({i}, {j})");
            }
        }
    }
}

#[test]
fn free_boundary_approaches_the_circle_under_refinement() {
    let a = RadialBenchmark::new(2).a;
    let errors: Vec<f64> = [1.0 / 16.0, 1.0 / 32.0]
        .iter()
        .map(|&h| {
            let v = solve(&ObstacleProblem::radial(h));
            let fb = extract_free_boundary(&v, h).unwrap();
            let e = hausdorff_to_circle(&fb.polyline, a);
            assert!(e <= 2.0 * h, "h = {h}: distance {e}");
            e
        })
        .collect();
    assert!(errors[1] < errors[0], "{errors:?}");
}
