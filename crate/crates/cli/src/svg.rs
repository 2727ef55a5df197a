//! Minimal SVG renderings of the report tables.

use std::fmt::Write;

use sqpredict::data::{DistributionSummary, NORMALIZED_MAX, NORMALIZED_MIN};
use sqpredict::objectives::CorrelationMatrix;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One band per dataset: histogram bars with min, mean and max markers.
pub fn distribution_svg(summary: &DistributionSummary) -> String {
    let (left, width, band) = (90.0, 400.0, 60.0);
    let height = band * summary.rows.len() as f64 + 30.0;
    let x_of = |q: f64| left + width * (q - NORMALIZED_MIN) / (NORMALIZED_MAX - NORMALIZED_MIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="11">"#,
        left + width + 20.0
    );
    for (k, row) in summary.rows.iter().enumerate() {
        let base = band * (k as f64 + 1.0);
        let peak = row.histogram.iter().copied().max().unwrap_or(0).max(1) as f64;
        let bin_w = width / row.histogram.len() as f64;
        let _ = writeln!(s, r#"<text x="4" y="{:.1}">{} (n={})</text>"#, base - 20.0, escape(&row.tag), row.count);
        for (b, &c) in row.histogram.iter().enumerate() {
            let h = (band - 15.0) * c as f64 / peak;
            let _ = writeln!(
                s,
                r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="#8fb3d9"/>"##,
                left + bin_w * b as f64,
                base - h,
                bin_w - 1.0
            );
        }
        for (q, color) in [(row.min, "#555"), (row.mean, "#c33"), (row.max, "#555")] {
            let x = x_of(q);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{base:.1}" stroke="{color}" stroke-width="1.5"/>"#,
                base - band + 15.0
            );
        }
    }
    let axis = height - 12.0;
    for q in [0.2, 0.4, 0.6, 0.8, 1.0] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{axis:.1}" text-anchor="middle">{q:.1}</text>"#, x_of(q));
    }
    s.push_str("</svg>\n");
    s
}

/// Heat map of pairwise correlations with the value printed in each cell.
pub fn correlation_svg(m: &CorrelationMatrix) -> String {
    let (cell, margin) = (48.0, 90.0);
    let size = margin + cell * m.names.len() as f64 + 10.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" font-family="sans-serif" font-size="11">"#
    );
    for (i, name) in m.names.iter().enumerate() {
        let c = margin + cell * (i as f64 + 0.5);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{c:.1}" text-anchor="end">{}</text>"#, margin - 6.0, escape(name));
        let _ = writeln!(s, r#"<text x="{c:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, margin - 8.0, escape(name));
    }
    for (i, row) in m.values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let (x, y) = (margin + cell * j as f64, margin + cell * i as f64);
            let t = v.clamp(-1.0, 1.0);
            let (r, g, b) = if t >= 0.0 {
                (255.0 * (1.0 - t), 255.0 * (1.0 - 0.6 * t), 255.0)
            } else {
                (255.0, 255.0 * (1.0 + 0.6 * t), 255.0 * (1.0 + t))
            };
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{cell}" height="{cell}" fill="rgb({:.0},{:.0},{:.0})" stroke="white"/>"#,
                r, g, b
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v:.2}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
