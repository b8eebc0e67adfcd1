//! Time series, plots, manifest and frequency analysis.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::RunConfig;
use crate::error::{FsiError, Result};

pub const CSV_HEADER: &str = "t,tip_x,tip_y,E_kinetic,E_elastic,E_dissip_cum,E_total,fp_iterations,min_solid_area_ratio";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRow {
    pub t: f64,
    pub tip_x: f64,
    pub tip_y: f64,
    pub e_kinetic: f64,
    pub e_elastic: f64,
    pub e_dissip_cum: f64,
    pub e_total: f64,
    pub fp_iterations: usize,
    pub min_solid_area_ratio: f64,
}

impl TimeSeriesRow {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
            self.t,
            self.tip_x,
            self.tip_y,
            self.e_kinetic,
            self.e_elastic,
            self.e_dissip_cum,
            self.e_total,
            self.fp_iterations,
            self.min_solid_area_ratio
        )?;
        Ok(())
    }
}

pub fn read_timeseries(text: &str) -> Result<Vec<TimeSeriesRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(FsiError::Parse { line: 1, msg: "unexpected time series header".into() }),
    }
    let mut rows: Vec<TimeSeriesRow> = Vec::new();
    for (n, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |msg: String| FsiError::Parse { line: n + 1, msg };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad(format!("expected 9 columns, got {}", f.len())));
        }
        let num = |i: usize| f[i].trim().parse::<f64>().map_err(|e| bad(e.to_string()));
        let r = TimeSeriesRow {
            t: num(0)?,
            tip_x: num(1)?,
            tip_y: num(2)?,
            e_kinetic: num(3)?,
            e_elastic: num(4)?,
            e_dissip_cum: num(5)?,
            e_total: num(6)?,
            fp_iterations: f[7].trim().parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            min_solid_area_ratio: num(8)?,
        };
        if rows.last().is_some_and(|p| p.t >= r.t) {
            return Err(bad("time is not increasing".into()));
        }
        rows.push(r);
    }
    Ok(rows)
}

/// Hex SHA-256 of `content` framed as a git blob object.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn write_manifest(config: &RunConfig, path: &Path) -> Result<()> {
    let toml = config.to_toml()?;
    let mut out = String::new();
    let _ = writeln!(out, "program monofsi {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "scenario {}", config.scenario);
    let _ = writeln!(out, "seed {}", config.seed);
    let _ = writeln!(out, "config_hash {}", blob_hash(toml.as_bytes()));
    let _ = writeln!(out, "[config]");
    out.push_str(&toml);
    fs::write(path, out)?;
    Ok(())
}

struct Series<'a> {
    name: &'a str,
    color: &'a str,
    points: Vec<(f64, f64)>,
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-300 {
        let pad = if lo.abs() > 0.0 { 0.05 * lo.abs() } else { 1.0 };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (90.0, 20.0, 40.0, 60.0);
    let all = series.iter().flat_map(|s| s.points.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (x0, x1) = nice_range(x0, x1);
    let (y0, y1) = nice_range(y0, y1);
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{xv:.3}</text>"#,
            px(xv),
            h - bottom + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{yv:.3e}</text>"#,
            left - 6.0,
            py(yv) + 4.0
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">{x_label}</text>"#, w / 2.0, h - 16.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {0})">{y_label}</text>"#,
        h / 2.0
    );
    for (k, ser) in series.iter().enumerate() {
        let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, ser.color, pts.join(" "));
        if series.len() > 1 {
            let ly = top + 16.0 + 16.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{2}" stroke-width="2"/><text x="{3}" y="{4}" font-family="sans-serif" font-size="11">{5}</text>"#,
                w - right - 130.0,
                w - right - 110.0,
                ser.color,
                w - right - 104.0,
                ly + 4.0,
                ser.name
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn finite(rows: &[super::TimeSeriesRow], f: impl Fn(&super::TimeSeriesRow) -> f64) -> Vec<(f64, f64)> {
    rows.iter().map(|r| (r.t, f(r))).filter(|(_, v)| v.is_finite()).collect()
}

/// Writes `tip_x.svg`, `tip_y.svg` and `energy.svg` from a time series file.
pub fn plot_from_csv(csv: &Path, dir: &Path) -> Result<()> {
    let rows = read_timeseries(&fs::read_to_string(csv)?)?;
    let one = |name: &'static str, f: &dyn Fn(&TimeSeriesRow) -> f64| {
        vec![Series { name, color: "#1f5fa8", points: finite(&rows, f) }]
    };
    fs::write(dir.join("tip_x.svg"), line_chart("tip x", "t (s)", "x (m)", &one("tip_x", &|r| r.tip_x)))?;
    fs::write(dir.join("tip_y.svg"), line_chart("tip y", "t (s)", "y (m)", &one("tip_y", &|r| r.tip_y)))?;
    let energy = [
        Series { name: "kinetic", color: "#1f5fa8", points: finite(&rows, |r| r.e_kinetic) },
        Series { name: "elastic", color: "#c0392b", points: finite(&rows, |r| r.e_elastic) },
        Series { name: "dissipated", color: "#27864a", points: finite(&rows, |r| r.e_dissip_cum) },
        Series { name: "total", color: "#222222", points: finite(&rows, |r| r.e_total) },
    ];
    fs::write(dir.join("energy.svg"), line_chart("energy", "t (s)", "J/m", &energy))?;
    Ok(())
}

/// Frequency (Hz) and half peak-to-peak amplitude of the last 60% of a signal.
///
/// Peaks are local maxima above the window mean, refined by a parabola
/// through the three neighbouring samples.
pub fn estimate_frequency_amplitude(t: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if t.len() != y.len() {
        return Err(FsiError::LengthMismatch { expected: t.len(), got: y.len() });
    }
    if t.len() < 5 {
        return Err(FsiError::InsufficientOscillation { peaks: 0 });
    }
    let start = t[0] + 0.4 * (t[t.len() - 1] - t[0]);
    let first = t.iter().position(|&v| v >= start).unwrap_or(0);
    let (t, y) = (&t[first..], &y[first..]);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut peaks = Vec::new();
    for i in 1..y.len() - 1 {
        if y[i] > mean && y[i] > y[i - 1] && y[i] >= y[i + 1] {
            let denom = y[i - 1] - 2.0 * y[i] + y[i + 1];
            let shift = if denom != 0.0 { 0.5 * (y[i - 1] - y[i + 1]) / denom } else { 0.0 };
            let step = 0.5 * (t[i + 1] - t[i - 1]);
            peaks.push(t[i] + shift * step);
        }
    }
    if peaks.len() < 3 {
        return Err(FsiError::InsufficientOscillation { peaks: peaks.len() });
    }
    let frequency = (peaks.len() - 1) as f64 / (peaks[peaks.len() - 1] - peaks[0]);
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    Ok((frequency, 0.5 * (hi - lo)))
}
