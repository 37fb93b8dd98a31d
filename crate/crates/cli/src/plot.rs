//! Minimal SVG line chart of mean PSNR against upload quality.

use std::collections::BTreeMap;
use std::fmt::Write;

use bscramble_core::experiment::{MeanPsnrRow, Variant};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub fn mean_psnr_svg(rows: &[MeanPsnrRow]) -> String {
    let mut series: BTreeMap<Variant, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        series.entry(r.variant).or_default().push((r.qf as f64, r.mean_psnr_db));
    }
    let finite = || rows.iter().map(|r| r.mean_psnr_db).filter(|v| v.is_finite());
    let (q_lo, q_hi) = rows.iter().fold((f64::MAX, f64::MIN), |(a, b), r| {
        (a.min(r.qf as f64), b.max(r.qf as f64))
    });
    let y_lo = finite().fold(f64::MAX, f64::min).floor();
    let y_hi = finite().fold(f64::MIN, f64::max).ceil();
    let (q_hi, y_hi) = (q_hi.max(q_lo + 1.0), y_hi.max(y_lo + 1.0));
    let x = |q: f64| MARGIN + (q - q_lo) / (q_hi - q_lo) * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| HEIGHT - MARGIN - (v.clamp(y_lo, y_hi) - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{left} {top} V{bottom} H{right}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">Upload quality</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">Mean PSNR [dB]</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (label, px, py, anchor) in [
        (format!("{q_lo}"), left, bottom + 16.0, "middle"),
        (format!("{q_hi}"), right, bottom + 16.0, "middle"),
        (format!("{y_lo}"), left - 6.0, bottom + 4.0, "end"),
        (format!("{y_hi}"), left - 6.0, top + 4.0, "end"),
    ] {
        let _ = writeln!(svg, r#"<text x="{px}" y="{py}" text-anchor="{anchor}">{label}</text>"#);
    }
    for (i, (variant, mut points)) in series.into_iter().enumerate() {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|&(q, v)| format!("{:.1},{:.1}", x(q), y(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            coords.join(" ")
        );
        let ly = top + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{variant}</text>"#,
            right - 150.0,
            right - 126.0,
            right - 120.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
