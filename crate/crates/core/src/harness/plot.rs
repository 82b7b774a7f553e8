//! Minimal SVG rendering of a diagnostics CSV: three stacked panels for R, V and Dmax against t.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{LoheError, Result};

const WIDTH: f64 = 720.0;
const PANEL_H: f64 = 200.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 24.0;
const GAP: f64 = 36.0;
const PANELS: [&str; 3] = ["R", "V", "Dmax"];

pub fn render_csv(path: &Path, log_scale: bool) -> Result<String> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LoheError::Config(format!("{}: missing column `{name}`", path.display())))
    };
    let t_col = col("t")?;
    let cols = PANELS.iter().map(|n| col(n)).collect::<Result<Vec<_>>>()?;

    let mut t = Vec::new();
    let mut series = vec![Vec::new(); PANELS.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).unwrap_or(f64::NAN);
        t.push(parse(t_col));
        for (s, &c) in series.iter_mut().zip(&cols) {
            s.push(parse(c));
        }
    }
    Ok(render(&t, &series, log_scale))
}

fn render(t: &[f64], series: &[Vec<f64>], log_scale: bool) -> String {
    let height = MARGIN_T + PANELS.len() as f64 * (PANEL_H + GAP);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (t0, t1) = range(t.iter().copied());
    for (k, (name, ys)) in PANELS.iter().zip(series).enumerate() {
        let top = MARGIN_T + k as f64 * (PANEL_H + GAP);
        let plot_w = WIDTH - MARGIN_L - MARGIN_R;
        let tf = |y: f64| if log_scale { y.log10() } else { y };
        let keep = |y: f64| y.is_finite() && (!log_scale || y > 0.0);
        let (y0, y1) = range(ys.iter().copied().filter(|&y| keep(y)).map(tf));
        let _ = writeln!(
            svg,
            r#"<rect x="{MARGIN_L}" y="{top}" width="{plot_w}" height="{PANEL_H}" fill="none" stroke="black"/>"#
        );
        let label = if log_scale { format!("log10 {name}") } else { name.to_string() };
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{label}</text>"#, MARGIN_L, top - 6.0);
        let _ = writeln!(
            svg,
            r#"<text x="4" y="{}">{}</text><text x="4" y="{}">{}</text>"#,
            top + 10.0,
            fmt_tick(y1),
            top + PANEL_H,
            fmt_tick(y0)
        );
        let mut pts = String::new();
        for (&x, &y) in t.iter().zip(ys) {
            if !keep(y) || !x.is_finite() {
                continue;
            }
            let px = MARGIN_L + (x - t0) / (t1 - t0) * plot_w;
            let py = top + PANEL_H - (tf(y) - y0) / (y1 - y0) * PANEL_H;
            let _ = write!(pts, "{px:.2},{py:.2} ");
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
            pts.trim_end()
        );
    }
    let bottom = MARGIN_T + PANELS.len() as f64 * (PANEL_H + GAP) - GAP + 14.0;
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN_L}" y="{bottom}">t = {}</text><text x="{}" y="{bottom}" text-anchor="end">{}</text>"#,
        fmt_tick(t0),
        WIDTH - MARGIN_R,
        fmt_tick(t1)
    );
    svg.push_str("</svg>\n");
    svg
}

/// Finite min/max, widened when degenerate so the scaling never divides by zero.
fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}
