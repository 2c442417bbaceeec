//! Command-line front end: subcommands, configuration resolution, exit codes.

pub mod config;
pub mod output;
pub mod pipelines;
pub mod report;

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

use self::config::RunConfig;
use self::output::Output;
use self::pipelines::{KeldyshParams, KeldyshTest, Problem, DEFAULT_SEED};
use crate::error::Result;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mafb", version, about = "Monge-Ampere obstacle problem, its singular dual and the half-space model equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed of randomized suites.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dimension of the half-space experiments.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Weight exponent `b`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    b: Option<String>,
    /// Grid spacing of the obstacle solve; accepts `1/64`.
    #[arg(long, global = true)]
    h: Option<String>,
    /// Solver residual tolerance.
    #[arg(long, global = true)]
    tol: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the obstacle problem; writes v and the free boundary.
    Solve,
    /// Solve, then Legendre-transform to the singular dual.
    Dualize,
    /// Growth, expansion and eigenvalue fits of the radial dual.
    Asymptotics,
    /// Closed-form residuals of the half-space model solutions.
    Models {
        /// Model name or `all`.
        #[arg(long, default_value = "all")]
        check: String,
    },
    /// Partial Legendre transform of the sampled example33 profile.
    Plt,
    /// Keldysh operator experiments.
    Keldysh {
        /// Single experiment; all four when omitted.
        #[arg(long, value_enum)]
        test: Option<TestArg>,
    },
    /// Weighted Calderon-Zygmund decomposition on a seeded random suite.
    Cz,
    /// Aggregate a run directory into summary.csv and SVG plots.
    Report {
        /// Run directory; defaults to --out.
        dir: Option<PathBuf>,
    },
    /// Every experiment, then the report.
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TestArg {
    Manufactured,
    Decay,
    Energy,
    Raise,
}

impl From<TestArg> for KeldyshTest {
    fn from(t: TestArg) -> Self {
        match t {
            TestArg::Manufactured => KeldyshTest::Manufactured,
            TestArg::Decay => KeldyshTest::Decay,
            TestArg::Energy => KeldyshTest::Energy,
            TestArg::Raise => KeldyshTest::Raise,
        }
    }
}

const ALL_TESTS: [KeldyshTest; 4] = [
    KeldyshTest::Manufactured,
    KeldyshTest::Decay,
    KeldyshTest::Energy,
    KeldyshTest::Raise,
];

fn usage(message: &str) -> i32 {
    eprintln!("{}\n", message.trim_end());
    eprintln!("{}", Cli::command().render_long_help());
    eprintln!("{}", config::schema());
    EXIT_USAGE
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    EXIT_OK
                }
                _ => usage(&e.to_string()),
            };
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => return usage(&format!("error: {e}")),
    };
    if let Command::Report { dir } = &cli.command {
        let dir = dir.clone().unwrap_or_else(|| cli.out.clone());
        return match report::report(&dir) {
            Ok(r) => {
                println!("report: {} stage tables, plots: {}", r.stages.len(), r.plots.join(" "));
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_FAILED
            }
        };
    }
    match execute(&cli, &cfg) {
        Ok(failures) if failures.is_empty() => EXIT_OK,
        Ok(failures) => {
            for f in failures {
                eprintln!("FAILED {f}");
            }
            EXIT_FAILED
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILED
        }
    }
}

/// Config file first, then flags on top; also validates every typed key.
fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = cli.seed {
        cfg.set("seed", &v.to_string())?;
    }
    if let Some(v) = cli.n {
        cfg.set("n", &v.to_string())?;
    }
    for (key, val) in [("b", &cli.b), ("h", &cli.h), ("tol", &cli.tol)] {
        if let Some(v) = val {
            cfg.set(key, v)?;
        }
    }
    for key in ["L", "h", "tol", "b"] {
        cfg.real(key)?;
    }
    for key in ["max_sweeps", "n", "seed", "cases", "points"] {
        cfg.integer(key)?;
    }
    if matches!(cli.command, Command::Solve | Command::Dualize | Command::All) {
        Problem::from_config(&cfg)?;
    }
    Ok(cfg)
}

fn execute(cli: &Cli, cfg: &RunConfig) -> Result<Vec<String>> {
    let mut out = Output::create(&cli.out)?;
    let seed = cfg.integer("seed")?.unwrap_or(DEFAULT_SEED);
    let n = cfg.integer("n")?.map(|v| v as usize);
    let b = cfg.real("b")?;
    let keldysh_params = KeldyshParams {
        n,
        b,
        points: cfg.integer("points")?.unwrap_or(20) as usize,
        seed,
    };
    let cases = cfg.integer("cases")?.unwrap_or(100) as usize;
    let name = match &cli.command {
        Command::Solve => {
            pipelines::solve(&mut out, &Problem::from_config(cfg)?, "")?;
            "solve"
        }
        Command::Dualize => {
            let pr = Problem::from_config(cfg)?;
            let (sol, fb) = pipelines::solve(&mut out, &pr, "")?;
            pipelines::dualize_stage(&mut out, &pr, &sol.v, &fb, "")?;
            "dualize"
        }
        Command::Asymptotics => {
            asymptotics(&mut out, cfg)?;
            "asymptotics"
        }
        Command::Models { check } => {
            pipelines::models(&mut out, check, n.unwrap_or(3), b.unwrap_or(1.5), seed)?;
            "models"
        }
        Command::Plt => {
            pipelines::plt(&mut out)?;
            "plt"
        }
        Command::Keldysh { test } => {
            let tests: Vec<KeldyshTest> = match test {
                Some(t) => vec![(*t).into()],
                None => ALL_TESTS.to_vec(),
            };
            pipelines::keldysh(&mut out, &tests, &keldysh_params)?;
            "keldysh"
        }
        Command::Cz => {
            pipelines::cz(&mut out, seed, cases, n, b)?;
            "cz"
        }
        Command::All => {
            let pr = Problem::from_config(cfg)?;
            let (sol, fb) = pipelines::solve(&mut out, &pr, "")?;
            if pr.radial {
                let finest = crate::body::hausdorff_to_circle(&fb.polyline, crate::radial::RadialBenchmark::new(2).a);
                pipelines::convergence(&mut out, (pr.problem.h, finest))?;
            }
            pipelines::dualize_stage(&mut out, &pr, &sol.v, &fb, "")?;
            pipelines::anisotropic(&mut out)?;
            asymptotics(&mut out, cfg)?;
            pipelines::models(&mut out, "all", 3, 1.5, seed)?;
            pipelines::plt(&mut out)?;
            let all_params = KeldyshParams {
                n: None,
                b: None,
                ..keldysh_params
            };
            pipelines::keldysh(&mut out, &ALL_TESTS, &all_params)?;
            pipelines::cz(&mut out, seed, cases, None, None)?;
            "all"
        }
        Command::Report { .. } => unreachable!("handled before execution"),
    };
    let mut extra = Vec::new();
    if name == "all" {
        let r = report::report(out.dir())?;
        extra.push("summary.csv".to_string());
        extra.extend(r.plots);
    }
    write_manifest(&mut out, name, cfg, seed, &extra)?;
    out.write_timings()?;
    Ok(out.failures())
}

/// Radial benchmark: the closed-form dual sampled at spacing `h`; any other
/// problem goes through solve and dualize first.
fn asymptotics(out: &mut Output, cfg: &RunConfig) -> Result<()> {
    let pr = Problem::from_config(cfg)?;
    if pr.radial {
        let d = pipelines::sampled_radial_dual(pr.problem.h)?;
        pipelines::asymptotics(out, &d, true)
    } else {
        let sol = crate::obstacle::solve_obstacle_with(&pr.problem, &pr.options)?;
        let fb = crate::obstacle::extract_free_boundary(&sol.v, pr.problem.h)?;
        let d = crate::dual::dualize(
            &sol.v,
            &fb.contact_set,
            crate::dual::GDesc {
                source: pr.problem.source.clone(),
            },
        )?;
        pipelines::asymptotics(out, &d, false)
    }
}

fn write_manifest(out: &mut Output, name: &str, cfg: &RunConfig, seed: u64, extra: &[String]) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "mafb {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "subcommand {name}");
    let _ = writeln!(s, "seed {seed}");
    s.push_str("[config]\n");
    s.push_str(&cfg.echo());
    s.push_str("[formats]\ngrid mafb-grid v1\ncsv header-first, comma-separated, 12-digit scientific\n");
    s.push_str("[artifacts]\n");
    for w in out.written().iter().chain(extra) {
        let _ = writeln!(s, "{w}");
    }
    out.write("manifest.txt", &s)
}
