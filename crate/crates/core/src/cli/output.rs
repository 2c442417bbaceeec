//! Output directory bookkeeping: artifacts, check tables and timings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::fit::fmt_num;

/// How a check compares its value with the bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    /// `|value - centre| <= tol`.
    Within(f64, f64),
}

impl Bound {
    pub fn holds(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost(b) => v <= b,
            Bound::AtLeast(b) => v >= b,
            Bound::Within(c, t) => (v - c).abs() <= t,
        }
    }

    fn text(&self) -> String {
        match *self {
            Bound::AtMost(b) => format!("<= {}", fmt_num(b)),
            Bound::AtLeast(b) => format!(">= {}", fmt_num(b)),
            Bound::Within(c, t) => format!("{} +- {}", fmt_num(c), fmt_num(t)),
        }
    }
}

/// One machine-checked quantity. `criterion` 0 marks a supporting property.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub pass: bool,
}

pub const CHECKS_HEADER: &str = "criterion,check,value,bound,pass\n";

/// Output directory of one run. Everything except `timings.txt` depends
/// only on the resolved configuration.
pub struct Output {
    dir: PathBuf,
    stage: String,
    checks: Vec<Check>,
    all_checks: Vec<Check>,
    timings: Vec<(String, f64, Option<f64>)>,
    written: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            stage: String::new(),
            checks: Vec::new(),
            all_checks: Vec::new(),
            timings: Vec::new(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Starts a stage whose checks go to `<stage>_checks.csv`.
    pub fn begin(&mut self, stage: &str) {
        self.stage = stage.to_string();
        self.checks.clear();
    }

    /// Writes `<stage>_checks.csv` for the current stage.
    pub fn end(&mut self) -> Result<()> {
        let mut s = String::from(CHECKS_HEADER);
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                c.criterion,
                c.name,
                fmt_num(c.value),
                c.bound.text(),
                if c.pass { "pass" } else { "fail" }
            );
        }
        let name = format!("{}_checks.csv", self.stage);
        self.write(&name, &s)?;
        self.all_checks.append(&mut self.checks);
        Ok(())
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, contents).map_err(|e| Error::io(&p, e))?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn check(&mut self, criterion: u8, name: &str, value: f64, bound: Bound) -> bool {
        let pass = bound.holds(value);
        self.checks.push(Check {
            criterion,
            name: name.to_string(),
            value,
            bound,
            pass,
        });
        pass
    }

    /// Records the wall time since `start`; with a budget it also counts as
    /// a check towards the exit code.
    pub fn time(&mut self, label: &str, start: Instant, budget: Option<f64>) {
        self.timings.push((label.to_string(), start.elapsed().as_secs_f64(), budget));
    }

    pub fn checks(&self) -> &[Check] {
        &self.all_checks
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .all_checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("criterion {}: {} = {} ({})", c.criterion, c.name, fmt_num(c.value), c.bound.text()))
            .collect();
        for (label, secs, budget) in &self.timings {
            if let Some(b) = budget {
                if secs > b {
                    out.push(format!("runtime {label}: {secs:.1} s over {b} s"));
                }
            }
        }
        out
    }

    /// `label seconds budget pass` lines; not part of the reproducible set.
    pub fn write_timings(&mut self) -> Result<()> {
        if self.timings.is_empty() {
            return Ok(());
        }
        let mut s = String::from("# stage seconds budget pass\n");
        for (label, secs, budget) in &self.timings {
            match budget {
                Some(b) => {
                    let _ = writeln!(s, "{label} {secs:.3} {b} {}", if secs <= b { "pass" } else { "fail" });
                }
                None => {
                    let _ = writeln!(s, "{label} {secs:.3} - -");
                }
            }
        }
        let p = self.path("timings.txt");
        std::fs::write(&p, s).map_err(|e| Error::io(&p, e))
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}
