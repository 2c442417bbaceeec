use mafb::halfspace::{partial_legendre, pde002_residual, HalfGridFunction, ModelSolution, SecondOrder};
use mafb::AxisBox;

fn example33_grid() -> HalfGridFunction {
    let m = ModelSolution::Example33 { n: 2, b: 1.5 };
    HalfGridFunction::sample(&m, &AxisBox::symmetric(1, 1.0).unwrap(), (0.5, 1.5), &[8193, 51]).unwrap()
}

#[test]
fn transported_example33_satisfies_002() {
    let psi = example33_grid();
    let star = partial_legendre(&psi, &AxisBox::symmetric(1, 0.5).unwrap(), Some(&[51])).unwrap();
    let exact = ModelSolution::Example33Conjugate { n: 2, b: 1.5 };
    let mut worst_value = 0.0f64;
    let mut pts = Vec::new();
    for i in 0..star.grid.len() {
        let idx = star.grid.multi_index(i);
        let y = star.grid.node(&idx);
        worst_value = worst_value.max((star.grid.values()[i] - exact.value(&y).unwrap()).abs());
        if idx[0] >= 5 && idx[0] <= 45 && idx[1] >= 5 && idx[1] <= 45 {
            pts.push(y);
        }
    }
    assert!(worst_value < 1e-7, "conjugate error {worst_value}");
    let r = pde002_residual(&star, 1.5, &pts).unwrap();
    let worst = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(worst <= 1e-3, "grid residual {worst}");
}

#[test]
fn partial_legendre_round_trip() {
    let psi = example33_grid();
    let star = partial_legendre(&psi, &AxisBox::symmetric(1, 0.5).unwrap(), Some(&[1001])).unwrap();
    let back = partial_legendre(&star, &AxisBox::symmetric(1, 0.4).unwrap(), Some(&[81])).unwrap();
    let m = ModelSolution::Example33 { n: 2, b: 1.5 };
    let h = star.grid.spacing()[0];
    let lip = 1.0;
    for i in 0..back.grid.len() {
        let x = back.grid.node(&back.grid.multi_index(i));
        let err = (back.grid.values()[i] - m.value(&x).unwrap()).abs();
        assert!(err <= 4.0 * h * lip, "at {x:?}: {err}");
    }
}
