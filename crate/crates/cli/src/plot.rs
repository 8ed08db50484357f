//! Trace CSV reading and static SVG line charts.

use std::fmt::Write as _;
use std::path::Path;

use crate::{io_failure, Failure};

pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

/// Columns of a trace CSV.
pub struct Table {
    pub time: Vec<f64>,
    columns: Vec<Series>,
}

impl Table {
    /// The requested channels in order, or an error naming everything available.
    pub fn select(&self, names: &[String]) -> Result<Vec<Series>, Failure> {
        let missing: Vec<&str> =
            names.iter().filter(|n| !self.columns.iter().any(|c| &c.name == *n)).map(String::as_str).collect();
        if !missing.is_empty() {
            let available: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
            return Err(Failure::Invalid(format!(
                "unknown channel(s) {}; available: {}",
                missing.join(", "),
                available.join(", ")
            )));
        }
        Ok(names
            .iter()
            .filter_map(|n| self.columns.iter().find(|c| &c.name == n))
            .map(|c| Series { name: c.name.clone(), values: c.values.clone() })
            .collect())
    }
}

pub fn read_trace(path: &Path) -> Result<Table, Failure> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| io_failure(path, e))?;
    let headers = rdr.headers().map_err(|e| io_failure(path, e))?.clone();
    if headers.get(0) != Some("time") {
        return Err(io_failure(path, "first column must be `time`"));
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| io_failure(path, e))?;
        for (k, field) in rec.iter().enumerate() {
            let x: f64 = field.parse().map_err(|_| io_failure(path, format!("row {}: `{field}` is not a number", line + 2)))?;
            cols[k].push(x);
        }
    }
    let mut it = headers.iter().zip(cols);
    let (_, time) = it.next().expect("time column checked above");
    Ok(Table { time, columns: it.map(|(n, values)| Series { name: n.to_string(), values }).collect() })
}

/// Physical quantity and unit implied by a channel name.
pub fn unit_of(name: &str) -> (&'static str, &'static str) {
    let has = |p: &str| name.starts_with(p);
    if has("vuf") {
        ("unbalance", "%")
    } else if has("omega") || has("pll_omega") {
        ("frequency", "rad/s")
    } else if has("v_") || has("pcc_mag") || has("pll_v_m") {
        ("voltage", "V")
    } else if has("i_") || has("mrdc_id") || has("mrdc_iq") {
        ("current", "A")
    } else if has("p_") || has("mrdc_p_") {
        ("active power", "W")
    } else if has("q_") || has("mrdc_q_") {
        ("reactive power", "var")
    } else {
        ("value", "1")
    }
}

const W: f64 = 900.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Tick positions covering `[lo, hi]` with steps of 1, 2 or 5 × 10ⁿ.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(x: f64) -> String {
    let s = format!("{:.6}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Keeps the per-pixel minimum and maximum so the envelope survives decimation.
fn decimate(time: &[f64], values: &[f64], buckets: usize) -> Vec<(f64, f64)> {
    if values.len() <= 2 * buckets {
        return time.iter().copied().zip(values.iter().copied()).collect();
    }
    let per = values.len().div_ceil(buckets);
    let mut out = Vec::with_capacity(2 * buckets);
    for (tc, vc) in time.chunks(per).zip(values.chunks(per)) {
        let (mut lo, mut hi) = (0, 0);
        for (k, v) in vc.iter().enumerate() {
            if *v < vc[lo] {
                lo = k;
            }
            if *v > vc[hi] {
                hi = k;
            }
        }
        let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        out.push((tc[a], vc[a]));
        if b != a {
            out.push((tc[b], vc[b]));
        }
    }
    out
}

fn range(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// Line chart with one polyline per series, labelled axes and a legend.
pub fn render(time: &[f64], series: &[Series]) -> String {
    let (t0, t1) = range(time.iter().copied());
    let (y0, y1) = range(series.iter().flat_map(|s| s.values.iter().copied()));
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |t: f64| LEFT + (t - t0) / (t1 - t0) * pw;
    let sy = |v: f64| TOP + (y1 - v) / (y1 - y0) * ph;

    let mut units: Vec<(&str, &str)> = series.iter().map(|s| unit_of(&s.name)).collect();
    units.dedup();
    let y_label = match units.as_slice() {
        [(q, u)] => format!("{q} ({u})"),
        _ => {
            let mut u: Vec<&str> = units.iter().map(|(_, u)| *u).collect();
            u.sort_unstable();
            u.dedup();
            format!("value ({})", u.join(", "))
        }
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, "<!-- generator: mmg-sim {} -->", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##);
    for t in ticks(t0, t1, 8) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 16.0,
            label(t)
        );
    }
    for v in ticks(y0, y1, 6) {
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            label(v)
        );
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time (s)</text>"#, LEFT + pw / 2.0, H - 18.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{y_label}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let n = ser.values.len().min(time.len());
        let mut runs: Vec<String> = Vec::new();
        let mut cur = String::new();
        for (t, v) in decimate(&time[..n], &ser.values[..n], pw as usize) {
            if v.is_finite() {
                let _ = write!(cur, "{:.2},{:.2} ", sx(t), sy(v));
            } else if !cur.is_empty() {
                runs.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            runs.push(cur);
        }
        for pts in runs {
            let _ = writeln!(
                s,
                r#"<polyline class="series" data-channel="{}" fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
                ser.name,
                pts.trim_end()
            );
        }
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            ser.name
        );
    }
    s.push_str("</svg>\n");
    s
}
