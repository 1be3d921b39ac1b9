//! CSV tables, run manifests and minimal SVG charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Formats a float so that it parses back to the same value.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// An in-memory CSV table. Cells never contain commas or quotes.
#[derive(Debug, Clone)]
pub struct Csv {
    columns: usize,
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self {
            columns: header.len(),
            text,
        }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        assert_eq!(cells.len(), self.columns, "row width differs from header");
        for (k, c) in cells.iter().enumerate() {
            if k > 0 {
                self.text.push(',');
            }
            self.text.push_str(c.as_ref());
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// What one subcommand produced, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct Output {
    pub subcommand: &'static str,
    /// Fully resolved configuration.
    pub config: Value,
    pub seed: Option<u64>,
    pub csv: String,
    pub summary: Value,
    pub counters: BTreeMap<String, u64>,
    pub chart: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub workers: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_seconds: f64,
    pub outputs: Vec<String>,
    pub counters: BTreeMap<String, u64>,
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Writes `<cmd>.csv`, `<cmd>_summary.json`, optionally `<cmd>.svg`, and
/// finally `<cmd>_manifest.json`. Returns the manifest path.
pub fn write_run(
    out_dir: &Path,
    output: &Output,
    svg: bool,
    workers: usize,
    started_unix: f64,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out_dir)?;
    let cmd = output.subcommand;
    let mut outputs = Vec::new();
    let mut put = |name: String, contents: &str| -> Result<(), CliError> {
        std::fs::write(out_dir.join(&name), contents)?;
        outputs.push(name);
        Ok(())
    };
    put(format!("{cmd}.csv"), &output.csv)?;
    put(format!("{cmd}_summary.json"), &to_pretty(&output.summary)?)?;
    if svg {
        if let Some(chart) = &output.chart {
            put(format!("{cmd}.svg"), chart)?;
        }
    }
    let finished = unix_now();
    let manifest = RunManifest {
        subcommand: cmd.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: output.config.clone(),
        seed: output.seed,
        workers,
        started_unix,
        finished_unix: finished,
        wall_seconds: finished - started_unix,
        outputs,
        counters: output.counters.clone(),
    };
    let path = out_dir.join(format!("{cmd}_manifest.json"));
    std::fs::write(&path, to_pretty(&manifest)?)?;
    Ok(path)
}

fn to_pretty<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLOURS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// A bare line chart. Points that are not finite, or not positive on a log
/// axis, are dropped.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log_x: bool, log_y: bool) -> String {
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let keep = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite() && (!log_x || x > 0.0) && (!log_y || y > 0.0);
    let lines: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| s.points.iter().filter(|p| keep(p)).map(|&(x, y)| (tx(x), ty(y))).collect())
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in lines.iter().flatten() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x0 < x1) {
        (x0, x1) = (x0 - 1.0, x0 + 1.0);
    }
    if !(y0 < y1) {
        (y0, y1) = (y0 - 1.0, y0 + 1.0);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let label = |v: f64, log: bool| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(svg, r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<text x="{l}" y="{}" text-anchor="start">{}</text>"#, b + 16.0, label(x0, log_x));
    let _ = writeln!(svg, r#"<text x="{r}" y="{}" text-anchor="end">{}</text>"#, b + 16.0, label(x1, log_x));
    let _ = writeln!(svg, r#"<text x="{}" y="{b}" text-anchor="end">{}</text>"#, l - 4.0, label(y0, log_y));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, l - 4.0, t + 4.0, label(y1, log_y));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 16.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (k, (s, pts)) in series.iter().zip(&lines).enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        if !pts.is_empty() {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        let ly = t + 16.0 * k as f64;
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}" fill="{colour}" text-anchor="end">{}</text>"#, r, escape(&s.name));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Thins a long series to at most `max` roughly log-spaced points.
pub fn thin(points: Vec<(f64, f64)>, max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max {
        return points;
    }
    let n = points.len();
    let mut keep: Vec<usize> = (0..max)
        .map(|k| ((n as f64).powf(k as f64 / (max - 1) as f64) - 1.0).round() as usize)
        .map(|i| i.min(n - 1))
        .collect();
    keep.dedup();
    keep.into_iter().map(|i| points[i]).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
