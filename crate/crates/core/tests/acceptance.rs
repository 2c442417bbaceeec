//! Runs `mafb all --seed 7` twice and judges every acceptance criterion from
//! the written tables against the bounds pinned below.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;

const H: f64 = 1.0 / 64.0;
const H_ANISO: f64 = 1.0 / 32.0;
/// Abscissa spacing of the intermediate grid in the round trip.
const H_PLT: f64 = 1.0 / 1000.0;

struct Run {
    /// `(stage, check)` to value, from summary.csv.
    values: BTreeMap<(String, String), f64>,
    /// Stage to wall-clock seconds, from timings.txt.
    seconds: BTreeMap<String, f64>,
    plt: BTreeMap<String, f64>,
}

fn run_all(dir: &Path) -> Run {
    let status = Command::new(env!("CARGO_BIN_EXE_mafb"))
        .args(["all", "--seed", "7", "--out"])
        .arg(dir)
        .status()
        .expect("mafb runs");
    assert!(status.code().is_some(), "mafb was terminated");
    let summary = fs::read_to_string(dir.join("summary.csv")).expect("summary.csv");
    let mut values = BTreeMap::new();
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        values.insert((f[0].to_string(), f[2].to_string()), f[3].parse().unwrap());
    }
    let timings = fs::read_to_string(dir.join("timings.txt")).expect("timings.txt");
    let seconds = timings
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[0].to_string(), f[1].parse().unwrap())
        })
        .collect();
    let plt = fs::read_to_string(dir.join("plt.csv"))
        .expect("plt.csv")
        .lines()
        .skip(1)
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect();
    Run { values, seconds, plt }
}

impl Run {
    fn get(&self, stage: &str, check: &str) -> f64 {
        *self
            .values
            .get(&(stage.to_string(), check.to_string()))
            .unwrap_or_else(|| panic!("no value for {stage}/{check}"))
    }
}

/// One criterion: the measured quantities and whether all bounds hold.
struct Verdict {
    pass: bool,
    detail: String,
}

fn at_most(name: &str, v: f64, bound: f64) -> Verdict {
    Verdict {
        pass: v <= bound,
        detail: format!("{name} {v:.4e} <= {bound:.4e}"),
    }
}

fn within(name: &str, v: f64, centre: f64, tol: f64) -> Verdict {
    Verdict {
        pass: (v - centre).abs() <= tol,
        detail: format!("{name} {v:.6} in {centre:.6} +- {tol:.1e}"),
    }
}

fn all_of(parts: Vec<Verdict>) -> Verdict {
    Verdict {
        pass: parts.iter().all(|p| p.pass),
        detail: parts.into_iter().map(|p| p.detail).collect::<Vec<_>>().join("; "),
    }
}

/// Files of `a` and `b` that differ byte-for-byte, timings excluded.
fn differing_files(a: &Path, b: &Path) -> Vec<String> {
    let names = |d: &Path| {
        let mut v: Vec<String> = fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n != "timings.txt")
            .collect();
        v.sort();
        v
    };
    let (na, nb) = (names(a), names(b));
    if na != nb {
        return vec![format!("file lists differ: {na:?} vs {nb:?}")];
    }
    na.into_iter()
        .filter(|n| fs::read(a.join(n)).unwrap() != fs::read(b.join(n)).unwrap())
        .collect()
}

#[test]
fn acceptance() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let r = run_all(first.path());
    run_all(second.path());

    let sqrt_pi = PI.sqrt();
    let keldysh_energy: Vec<Verdict> = ["1.200000000000e0", "1.666666666667e0", "2.000000000000e0"]
        .iter()
        .map(|b| at_most(&format!("gap(b={b})"), r.get("keldysh", &format!("energy_gap_b{b}")), 1e-3))
        .collect();
    let diff = differing_files(first.path(), second.path());

    let verdicts = vec![
        all_of(vec![
            at_most("hausdorff", r.get("solve", "circle_hausdorff"), 2.0 * H),
            at_most("seconds", r.seconds["solve"], 120.0),
        ]),
        within("c*", r.get("dualize", "c_star"), 1.0, 0.05),
        all_of(vec![
            within("min slope", r.get("asymptotics", "slope_min"), 3.0, 0.05),
            within("max slope", r.get("asymptotics", "slope_max"), 3.0, 0.05),
        ]),
        all_of(vec![
            within("phi0", r.get("asymptotics", "phi0"), 0.564190, 1e-3),
            within("phi1", r.get("asymptotics", "phi1"), 0.295409, 5e-3),
            Verdict {
                pass: r.get("asymptotics", "even_odd_ratio") >= 10.0,
                detail: format!("even-over-odd fit ratio {:.1} >= 10", r.get("asymptotics", "even_odd_ratio")),
            },
        ]),
        all_of(vec![
            within("r lambda_tan", r.get("asymptotics", "r_lambda_tan"), 1.0 / sqrt_pi, 0.05 / sqrt_pi),
            within("lambda_rad / r", r.get("asymptotics", "lambda_rad_over_r"), sqrt_pi, 0.05 * sqrt_pi),
        ]),
        all_of(
            ["example31", "example33", "jw_radial", "jw_flat", "savin"]
                .iter()
                .map(|m| at_most(m, r.get("models", &format!("{m}_max_residual")), 1e-10))
                .collect(),
        ),
        all_of(vec![
            at_most("analytic", r.get("models", "example33-conjugate_max_residual"), 1e-10),
            at_most("grid", r.get("plt", "pde002_grid_residual"), 1e-3),
            at_most("round trip", r.get("plt", "round_trip_error"), 4.0 * H_PLT * r.plt["lipschitz"]),
        ]),
        all_of(vec![
            at_most("max error", r.get("keldysh", "manufactured_max_error"), 1e-3),
            at_most("seconds", r.seconds["keldysh_manufactured"], 300.0),
        ]),
        all_of(keldysh_energy),
        all_of(vec![
            at_most("(3,5/3) deviation", r.get("keldysh", "decay_deviation_n3"), 0.1),
            at_most("(2,2) deviation", r.get("keldysh", "decay_deviation_n2"), 0.1),
        ]),
        all_of(vec![
            at_most("failing cases", r.get("cz", "failing_cases"), 0.0),
            Verdict {
                pass: r.get("cz", "cases") >= 100.0,
                detail: format!("{} cases", r.get("cz", "cases")),
            },
            at_most("mean zero", r.get("cz", "h_mean_zero"), 1e-12),
            at_most("reconstruction", r.get("cz", "reconstruction"), 1e-12),
        ]),
        all_of(vec![
            at_most("radial", r.get("dualize", "duality_hausdorff"), 2.0 * H),
            at_most("anisotropic", r.get("aniso_dualize", "duality_hausdorff"), 2.0 * H_ANISO),
        ]),
        Verdict {
            pass: diff.is_empty(),
            detail: if diff.is_empty() {
                "two runs byte-identical".to_string()
            } else {
                format!("differing: {}", diff.join(" "))
            },
        },
    ];

    // written to the process stdout so the lines survive output capture
    let mut stdout = std::io::stdout().lock();
    for (k, v) in verdicts.iter().enumerate() {
        let _ = writeln!(stdout, "criterion {}: {} ({})", k + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    drop(stdout);
    let failed: Vec<usize> = (0..verdicts.len()).filter(|&k| !verdicts[k].pass).map(|k| k + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
