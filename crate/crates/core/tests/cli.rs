use std::fs;
use std::path::Path;

use mafb::cli::{run, EXIT_FAILED, EXIT_OK, EXIT_USAGE};

fn mafb(args: &[&str]) -> i32 {
    run(std::iter::once("mafb").chain(args.iter().copied()))
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(mafb(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(mafb(&["solve", "--h", "abc"]), EXIT_USAGE);
    assert_eq!(mafb(&["solve", "--h", "0.3"]), EXIT_USAGE);
    assert_eq!(mafb(&["keldysh", "--test", "nope"]), EXIT_USAGE);
    assert_eq!(mafb(&["--help"]), EXIT_OK);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    let out = out_arg(&dir.path().join("out"));
    for text in ["depth = 3\n", "h = 1/64\nh = 1/32\n", "L 2\n", "f = grid-that-does-not-exist.grid\n"] {
        fs::write(&bad, text).unwrap();
        assert_eq!(mafb(&["solve", "--config", bad.to_str().unwrap(), "--out", &out]), EXIT_USAGE, "{text}");
    }
}

#[test]
fn report_on_an_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mafb(&["report", dir.path().to_str().unwrap()]), EXIT_FAILED);
}

#[test]
fn models_writes_residual_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    assert_eq!(mafb(&["models", "--out", &out, "--seed", "11"]), EXIT_OK);
    let table = fs::read_to_string(dir.path().join("models.csv")).unwrap();
    assert!(table.starts_with("model,point,residual\n"));
    let checks = fs::read_to_string(dir.path().join("models_checks.csv")).unwrap();
    assert!(checks.lines().skip(1).all(|l| l.ends_with(",pass")), "{checks}");
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("subcommand models\n") && manifest.contains("seed = 11\n"));
}

#[test]
fn solve_from_config_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# coarse radial run\nL = 2\nh = 1/16\nf = const:1\nv0 = radial-exact\n").unwrap();
    let out = out_arg(&dir.path().join("out"));
    assert_eq!(mafb(&["solve", "--config", cfg.to_str().unwrap(), "--out", &out]), EXIT_OK);
    let o = dir.path().join("out");
    for f in ["v.grid", "gamma.csv", "contact.csv", "solve.csv", "solve_checks.csv", "manifest.txt"] {
        assert!(o.join(f).is_file(), "missing {f}");
    }
    let manifest = fs::read_to_string(o.join("manifest.txt")).unwrap();
    assert!(manifest.contains("h = 1/16\n"));
    assert_eq!(mafb(&["report", &out]), EXIT_OK);
    let summary = fs::read_to_string(o.join("summary.csv")).unwrap();
    assert!(summary.starts_with("stage,criterion,check,value,bound,pass\n"));
    assert!(summary.contains("solve,1,circle_hausdorff,"));
}

#[test]
fn cz_tables_are_reproducible() {
    let read = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(mafb(&["cz", "--seed", seed, "--out", &out_arg(dir.path())]), EXIT_OK);
        ["cz_cubes.csv", "cz_properties.csv", "cz_checks.csv"].map(|f| fs::read(dir.path().join(f)).unwrap())
    };
    assert_eq!(read("5"), read("5"));
    assert_ne!(read("5")[0], read("6")[0]);
}
