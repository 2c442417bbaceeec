//! `summary.csv` and static SVG plots from a run directory.

use std::fmt::Write as _;
use std::path::Path;

use super::pipelines::loglog_slope;
use crate::error::{Error, Result};

/// Stage check tables in summary order.
pub const STAGES: [&str; 10] = [
    "solve",
    "convergence",
    "dualize",
    "aniso_solve",
    "aniso_dualize",
    "asymptotics",
    "models",
    "plt",
    "keldysh",
    "cz",
];

/// What `report` produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub stages: Vec<String>,
    pub plots: Vec<String>,
    pub failed_checks: usize,
}

fn read_rows(path: &Path) -> Result<Option<Vec<Vec<String>>>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(Some(
        text.lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect(),
    ))
}

fn num(cell: &str) -> Result<f64> {
    cell.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("expected a number, got {cell:?}")))
}

/// Expected stage files, for the error listing.
pub fn expected_files() -> Vec<String> {
    STAGES.iter().map(|s| format!("{s}_checks.csv")).collect()
}

/// Aggregates every `<stage>_checks.csv` in `dir` and draws the plots whose
/// inputs are present. Fails with the list of expected files when no stage
/// table exists.
pub fn report(dir: &Path) -> Result<ReportSummary> {
    let mut summary = String::from("stage,criterion,check,value,bound,pass\n");
    let mut stages = Vec::new();
    let mut failed = 0;
    for stage in STAGES {
        if let Some(rows) = read_rows(&dir.join(format!("{stage}_checks.csv")))? {
            for r in rows {
                if r.last().map(String::as_str) == Some("fail") {
                    failed += 1;
                }
                let _ = writeln!(summary, "{stage},{}", r.join(","));
            }
            stages.push(stage.to_string());
        }
    }
    if stages.is_empty() {
        return Err(Error::Parse(format!(
            "no run outputs in {}; expected any of: {}",
            dir.display(),
            expected_files().join(", ")
        )));
    }
    let write = |name: &str, text: &str| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("summary.csv", &summary)?;

    let mut plots = Vec::new();
    if let Some(rows) = read_rows(&dir.join("growth.csv"))? {
        let mut pts = Vec::new();
        for r in rows.iter().filter(|r| r[0] == "0") {
            pts.push((num(&r[1])?, num(&r[2])?));
        }
        if let Some(slope) = loglog_slope(&pts) {
            let svg = Plot::new("Growth of w along a ray", "log r", "log w", true)
                .series("w(r e)", &pts, true)
                .fit_line(&pts)
                .note(&format!("slope {slope:.2}"))
                .render();
            write("growth.svg", &svg)?;
            plots.push("growth.svg".to_string());
        }
    }
    if let (Some(field), Some(fits)) = (read_rows(&dir.join("polar_field.csv"))?, read_rows(&dir.join("fits.csv"))?) {
        let theta0 = field.first().map(|r| r[0].clone()).unwrap_or_default();
        let mut pts = Vec::new();
        for r in field.iter().filter(|r| r[0] == theta0) {
            pts.push((num(&r[1])?, num(&r[2])?));
        }
        let coeffs: Vec<f64> = fits
            .iter()
            .filter(|r| r[0] == "expansion")
            .map(|r| num(&r[2]))
            .collect::<Result<_>>()?;
        if !pts.is_empty() && !coeffs.is_empty() {
            let smax = pts.iter().map(|p| p.0).fold(0.0, f64::max);
            let model: Vec<(f64, f64)> = (0..=100)
                .map(|i| {
                    let s = smax * i as f64 / 100.0;
                    (s, coeffs.iter().enumerate().map(|(k, c)| c * s.powi(2 * k as i32)).sum())
                })
                .collect();
            let svg = Plot::new("Polar profile and even expansion", "s", "zeta", false)
                .series("zeta(theta0, s)", &pts, true)
                .series("sum phi_i s^2i", &model, false)
                .note(&format!("phi0 {:.6}  phi1 {:.6}", coeffs[0], coeffs.get(1).copied().unwrap_or(f64::NAN)))
                .render();
            write("expansion.svg", &svg)?;
            plots.push("expansion.svg".to_string());
        }
    }
    if let Some(rows) = read_rows(&dir.join("decay_samples.csv"))? {
        let mut plot = Plot::new("Far-field decay of the Keldysh potential", "log |x|", "log |T f|", true);
        let mut notes = Vec::new();
        let mut keys: Vec<(String, String)> = Vec::new();
        for r in &rows {
            let k = (r[0].clone(), r[1].clone());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        for (n, b) in &keys {
            let mut pts = Vec::new();
            for r in rows.iter().filter(|r| &r[0] == n && &r[1] == b) {
                pts.push((num(&r[2])?, num(&r[3])?));
            }
            let label = format!("n={n} b={:.4}", num(b)?);
            if let Some(s) = loglog_slope(&pts) {
                notes.push(format!("{label}: slope {s:.2}"));
            }
            plot = plot.series(&label, &pts, true).fit_line(&pts);
        }
        let svg = plot.note(&notes.join("; ")).render();
        write("decay.svg", &svg)?;
        plots.push("decay.svg".to_string());
    }
    if let Some(rows) = read_rows(&dir.join("convergence.csv"))? {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| Ok((num(&r[0])?, num(&r[1])?))).collect::<Result<_>>()?;
        if let Some(s) = loglog_slope(&pts) {
            let svg = Plot::new("Free-boundary error under refinement", "log h", "log Hausdorff", true)
                .series("radial benchmark", &pts, true)
                .fit_line(&pts)
                .note(&format!("order {s:.2}"))
                .render();
            write("convergence.svg", &svg)?;
            plots.push("convergence.svg".to_string());
        }
    }
    Ok(ReportSummary {
        stages,
        plots,
        failed_checks: failed,
    })
}

const COLORS: [&str; 4] = ["#1f4e9c", "#c0392b", "#2e8b57", "#7d3c98"];
const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 64.0;

/// A minimal line plot rendered to static SVG markup.
struct Plot {
    title: String,
    xlabel: String,
    ylabel: String,
    log: bool,
    series: Vec<(String, Vec<(f64, f64)>, bool, bool)>,
    notes: Vec<String>,
}

impl Plot {
    fn new(title: &str, xlabel: &str, ylabel: &str, log: bool) -> Self {
        Plot {
            title: title.into(),
            xlabel: xlabel.into(),
            ylabel: ylabel.into(),
            log,
            series: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn tr(&self, p: (f64, f64)) -> Option<(f64, f64)> {
        if self.log {
            (p.0 > 0.0 && p.1 > 0.0).then(|| (p.0.ln(), p.1.ln()))
        } else {
            (p.0.is_finite() && p.1.is_finite()).then_some(p)
        }
    }

    fn series(mut self, label: &str, pts: &[(f64, f64)], markers: bool) -> Self {
        let t: Vec<(f64, f64)> = pts.iter().filter_map(|&p| self.tr(p)).collect();
        self.series.push((label.into(), t, markers, false));
        self
    }

    /// Least-squares line through the transformed points, dashed.
    fn fit_line(mut self, pts: &[(f64, f64)]) -> Self {
        let t: Vec<(f64, f64)> = pts.iter().filter_map(|&p| self.tr(p)).collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = t.iter().cloned().unzip();
        if let Ok((p, q, _)) = crate::fit::line_fit(&xs, &ys) {
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            self.series.push(("fit".into(), vec![(lo, p * lo + q), (hi, p * hi + q)], false, true));
        }
        self
    }

    fn note(mut self, text: &str) -> Self {
        self.notes.push(text.into());
        self
    }

    fn render(&self) -> String {
        let all: Vec<(f64, f64)> = self.series.iter().flat_map(|s| s.1.iter().cloned()).collect();
        let span = |f: &dyn Fn(&(f64, f64)) -> f64| {
            let lo = all.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = all.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                (lo - 1.0, lo + 1.0)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (x0, x1) = span(&|p| p.0);
        let (y0, y1) = span(&|p| p.1);
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
        let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
        );
        let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
        let _ = writeln!(
            s,
            "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
            W - 2.0 * MARGIN,
            H - 2.0 * MARGIN
        );
        let _ = writeln!(s, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>", W / 2.0, esc(&self.title));
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", W / 2.0, H - 16.0, esc(&self.xlabel));
        let _ = writeln!(
            s,
            "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>",
            H / 2.0,
            H / 2.0,
            esc(&self.ylabel)
        );
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", sx(fx), H - MARGIN + 16.0, tick(fx));
            let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", MARGIN - 6.0, sy(fy) + 4.0, tick(fy));
        }
        let mut color = 0;
        let mut legend_y = MARGIN + 16.0;
        for (label, pts, markers, dashed) in &self.series {
            let c = if *dashed { "#555" } else { COLORS[color % COLORS.len()] };
            if !*dashed {
                color += 1;
            }
            let path: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
            let dash = if *dashed { " stroke-dasharray=\"6 4\"" } else { "" };
            let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>", path.join(" "));
            if *markers {
                for p in pts {
                    let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{c}\"/>", sx(p.0), sy(p.1));
                }
            }
            if !*dashed {
                let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{legend_y:.1}\" fill=\"{c}\">{}</text>", MARGIN + 10.0, esc(label));
                legend_y += 16.0;
            }
        }
        for (i, n) in self.notes.iter().enumerate() {
            let _ = writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
                W - MARGIN - 10.0,
                H - MARGIN - 12.0 - 16.0 * i as f64,
                esc(n)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e-2 && v.abs() < 1e3 || v == 0.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.1e}")
    }
}

fn esc(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::fmt_num;

    #[test]
    fn empty_directory_lists_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let err = report(dir.path()).unwrap_err().to_string();
        assert!(err.contains("solve_checks.csv") && err.contains("cz_checks.csv"));
    }

    #[test]
    fn growth_plot_carries_the_slope() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("models_checks.csv"), "criterion,check,value,bound,pass\n6,x,0,<= 1,pass\n").unwrap();
        let mut g = String::from("ray,r,w\n");
        for k in 0..10 {
            let r = 0.05 * 1.2f64.powi(k);
            g.push_str(&format!("0,{},{}\n", fmt_num(r), fmt_num(0.1 * r * r * r)));
        }
        std::fs::write(dir.path().join("growth.csv"), g).unwrap();
        let rep = report(dir.path()).unwrap();
        assert_eq!(rep.plots, vec!["growth.svg".to_string()]);
        let svg = std::fs::read_to_string(dir.path().join("growth.svg")).unwrap();
        assert!(svg.contains("slope 3.00") && svg.starts_with("<svg"));
        let first = std::fs::read(dir.path().join("summary.csv")).unwrap();
        report(dir.path()).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("summary.csv")).unwrap());
    }
}
