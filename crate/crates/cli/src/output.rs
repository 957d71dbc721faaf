//! CSV, JSON and SVG emission.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

/// Seventeen significant digits, round-trip exact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes an RFC-4180 table (CRLF line ends).
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 640.0;
const MARGIN: f64 = 70.0;
const TICKS: usize = 5;

/// A square plot of one curve with the downward-closed region below it
/// shaded. Both axes share the same range.
pub fn region_svg(points: &[(f64, f64)], title: &str) -> String {
    let (mut lo, mut hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, y)| (lo.min(x).min(y), hi.max(x).max(y)));
    if !(hi > lo) {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    let span = WIDTH - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - lo) / (hi - lo) * span;
    let sy = |y: f64| HEIGHT - MARGIN - (y - lo) / (hi - lo) * span;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    // Shaded region: curve, then down and back along the frame.
    let (first, last) = (points[0], points[points.len() - 1]);
    let mut poly: Vec<(f64, f64)> = points.to_vec();
    poly.push((last.0, lo));
    poly.push((lo, lo));
    poly.push((lo, first.1));
    let _ = writeln!(s, r##"<polygon points="{}" fill="#cfe0f3" stroke="none"/>"##, coords(&poly, &sx, &sy));
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#1f4e8c" stroke-width="2"/>"##,
        coords(points, &sx, &sy)
    );

    let (x0, x1, y0, y1) = (sx(lo), sx(hi), sy(lo), sy(hi));
    let _ = writeln!(
        s,
        r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for k in 0..=TICKS {
        let v = lo + (hi - lo) * k as f64 / TICKS as f64;
        let (px, py) = (sx(v), sy(v));
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{v:.2}</text>"#,
            y0 + 20.0
        );
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">{v:.2}</text>"#,
            x0 - 8.0,
            py + 4.0
        );
    }
    // Coordinate axes through the origin when it is in range.
    if lo < 0.0 && hi > 0.0 {
        let (ox, oy) = (sx(0.0), sy(0.0));
        let _ = writeln!(
            s,
            r##"<line x1="{ox:.2}" y1="{y0:.2}" x2="{ox:.2}" y2="{y1:.2}" stroke="#888888" stroke-dasharray="4 3"/>"##
        );
        let _ = writeln!(
            s,
            r##"<line x1="{x0:.2}" y1="{oy:.2}" x2="{x1:.2}" y2="{oy:.2}" stroke="#888888" stroke-dasharray="4 3"/>"##
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle">L1 (nats/√use)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle" transform="rotate(-90 20 {:.2})">L2 (nats/√use)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="30" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    s.push_str("</svg>\n");
    s
}

fn coords(pts: &[(f64, f64)], sx: &impl Fn(f64) -> f64, sy: &impl Fn(f64) -> f64) -> String {
    pts.iter().map(|&(x, y)| format!("{:.3},{:.3}", sx(x), sy(y))).collect::<Vec<_>>().join(" ")
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
