//! Static SVG line charts.

use std::fmt::Write as _;
use std::path::Path;

use super::DataError;
use crate::scalar::Scalar;
use crate::trace::RunTrace;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const MARGIN: f64 = 0.05;
/// Longer series are reduced to per-bucket min/max pairs.
const MAX_POINTS: usize = 4000;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// One named line on a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartSeries {
    pub name: String,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

impl ChartSeries {
    pub fn new(name: impl Into<String>, t: Vec<f64>, v: Vec<f64>) -> Self {
        Self { name: name.into(), t, v }
    }
}

/// Plots the named trace channels against time.
pub fn emit_plot<T: Scalar>(trace: &RunTrace<T>, channels: &[&str], path: impl AsRef<Path>) -> Result<(), DataError> {
    if channels.is_empty() {
        return Err(DataError::NoChannels);
    }
    let t: Vec<f64> = trace.t.iter().map(|v| v.to_f64_lossy()).collect();
    let series = channels
        .iter()
        .map(|&name| {
            let v = trace
                .channel(name)
                .filter(|_| name != "t")
                .ok_or_else(|| DataError::UnknownChannel(name.into()))?;
            Ok(ChartSeries::new(name, t.clone(), v.iter().map(|x| x.to_f64_lossy()).collect()))
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    let title = format!("{} estimator", trace.kind.preset_name());
    write_chart(&title, "t [min]", &series, path)
}

/// Writes `series` as one SVG chart with a shared pair of axes.
pub fn write_chart(title: &str, x_label: &str, series: &[ChartSeries], path: impl AsRef<Path>) -> Result<(), DataError> {
    if series.is_empty() {
        return Err(DataError::NoChannels);
    }
    let path = path.as_ref();
    std::fs::write(path, render(title, x_label, series)).map_err(|e| DataError::io(path, e))
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return (-1.0, 1.0);
    }
    let span = hi - lo;
    let pad = if span > 0.0 { span * MARGIN } else { lo.abs().max(1.0) * MARGIN };
    (lo - pad, hi + pad)
}

fn decimate(t: &[f64], v: &[f64]) -> Vec<(f64, f64)> {
    let n = t.len().min(v.len());
    if n <= MAX_POINTS {
        return t.iter().zip(v).map(|(&a, &b)| (a, b)).collect();
    }
    let buckets = MAX_POINTS / 2;
    let mut out = Vec::with_capacity(MAX_POINTS + 1);
    for k in 0..buckets {
        let lo = k * n / buckets;
        let hi = ((k + 1) * n / buckets).max(lo + 1);
        let (mut imin, mut imax) = (lo, lo);
        for i in lo..hi {
            if v[i] < v[imin] {
                imin = i;
            }
            if v[i] > v[imax] {
                imax = i;
            }
        }
        let (a, b) = if imin <= imax { (imin, imax) } else { (imax, imin) };
        out.push((t[a], v[a]));
        if b != a {
            out.push((t[b], v[b]));
        }
    }
    out.push((t[n - 1], v[n - 1]));
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn render(title: &str, x_label: &str, series: &[ChartSeries]) -> String {
    let (x0, x1) = padded_range(series.iter().flat_map(|s| s.t.iter().copied()));
    let (y0, y1) = padded_range(series.iter().flat_map(|s| s.v.iter().copied()));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-x-min="{x0:e}" data-x-max="{x1:e}" data-y-min="{y0:e}" data-y-max="{y1:e}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16" font-family="sans-serif">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect class="frame" x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    for i in 0..=5 {
        let f = f64::from(i) / 5.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#ccc"/><text x="{px:.2}" y="{:.2}" text-anchor="middle" font-size="11" font-family="sans-serif">{}</text>"##,
            TOP,
            TOP + ph,
            TOP + ph + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ccc"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11" font-family="sans-serif">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13" font-family="sans-serif">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text class="y-label" x="18" y="{:.2}" text-anchor="middle" font-size="13" font-family="sans-serif" transform="rotate(-90 18 {:.2})">value</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        for (t, v) in decimate(&ser.t, &ser.v) {
            if t.is_finite() && v.is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", sx(t), sy(v));
            }
        }
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-channel="{}" fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            escape(&ser.name),
            pts.trim_end()
        );
        let ly = TOP + 16.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 16.0;
        let _ = writeln!(
            s,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-size="12" font-family="sans-serif">{}</text></g>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.into() }
    }
}
