//! Log-scale SVG plots from experiment CSV files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::BOUND;

/// Maximum points drawn per polyline.
pub const MAX_POINTS: usize = 2000;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Series keyed by metric, then by method, as `(iter, value)` pairs.
pub type SeriesTable = BTreeMap<String, BTreeMap<String, Vec<(f64, f64)>>>;

/// Reads a `method,iter,metric,value` CSV.
pub fn read_series(path: &Path) -> Result<SeriesTable> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["method", "iter", "metric", "value"] {
        return Err(Error::Parse(format!("{}: expected header method,iter,metric,value", path.display())));
    }
    let mut table = SeriesTable::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| {
            rec[i].parse::<f64>().map_err(|e| Error::Parse(format!("{}: `{}`: {e}", path.display(), &rec[i])))
        };
        let (iter, value) = (num(1)?, num(3)?);
        table.entry(rec[2].to_string()).or_default().entry(rec[0].to_string()).or_default().push((iter, value));
    }
    if table.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    Ok(table)
}

fn decimate(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let step = points.len().div_ceil(MAX_POINTS);
    let mut out: Vec<_> = points.iter().step_by(step).copied().collect();
    if out.last() != points.last() {
        out.push(*points.last().expect("non-empty"));
    }
    out
}

/// Renders one metric as an SVG document with a logarithmic y axis.
pub fn render_svg(title: &str, series: &BTreeMap<String, Vec<(f64, f64)>>) -> String {
    let positive = |&(x, v): &(f64, f64)| v > 0.0 && v.is_finite() && x.is_finite();
    let all: Vec<(f64, f64)> = series.values().flatten().copied().filter(positive).collect();
    let (mut x_max, mut lo, mut hi) = (1.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, v) in &all {
        x_max = x_max.max(x);
        lo = lo.min(v.log10());
        hi = hi.max(v.log10());
    }
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 1.0);
    }
    let (lo, hi) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
    let px = |x: f64| MARGIN + (WIDTH - 2.0 * MARGIN) * x / x_max;
    let py = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v.log10() - lo) / (hi - lo);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(svg, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
    for e in lo as i64..=hi as i64 {
        let y = py(10f64.powi(e as i32));
        let _ = writeln!(svg, r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/>"##);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"#, x0 - 6.0, y + 4.0);
    }
    for i in 0..=4 {
        let x = x_max * i as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, px(x), y1 + 18.0, x.round());
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">iteration</text>"#, WIDTH / 2.0, HEIGHT - 16.0);
    let mut color = 0;
    for (i, (method, pts)) in series.iter().enumerate() {
        let pts: Vec<_> = pts.iter().copied().filter(positive).collect();
        let (stroke, dash) = if method == BOUND {
            ("black", r#" stroke-dasharray="6 4""#)
        } else {
            color += 1;
            (COLORS[(color - 1) % COLORS.len()], "")
        };
        let coords: Vec<String> = decimate(&pts).iter().map(|&(x, v)| format!("{:.2},{:.2}", px(x), py(v))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{stroke}" stroke-width="1.5"{dash} points="{}"/>"#, coords.join(" "));
        let ly = y0 + 16.0 + 16.0 * i as f64;
        let _ = writeln!(svg, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{stroke}" stroke-width="1.5"{dash}/>"#, x1 - 150.0, x1 - 120.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, x1 - 114.0, ly + 4.0, escape(method));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `<stem>_<metric>.svg` into `out_dir` for every metric in the CSV.
pub fn plot_csv(csv_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let table = read_series(csv_path)?;
    std::fs::create_dir_all(out_dir)?;
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let mut written = Vec::new();
    for (metric, series) in &table {
        let path = out_dir.join(format!("{stem}_{metric}.svg"));
        std::fs::write(&path, render_svg(&format!("{stem}: {metric}"), series))?;
        written.push(path);
    }
    Ok(written)
}
