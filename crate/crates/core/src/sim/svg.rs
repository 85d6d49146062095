//! Minimal SVG charts for evaluation reports.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 360.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 60.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    s
}

fn y_axis(s: &mut String, x: f64, max: f64, right: bool) {
    let plot_h = H - TOP - BOTTOM;
    let _ = writeln!(
        s,
        r#"<line x1="{x}" y1="{TOP}" x2="{x}" y2="{}" stroke="black"/>"#,
        H - BOTTOM
    );
    for k in 0..=4 {
        let v = max * k as f64 / 4.0;
        let y = H - BOTTOM - plot_h * k as f64 / 4.0;
        let (tx, anchor) = if right { (x + 6.0, "start") } else { (x - 6.0, "end") };
        let _ = writeln!(
            s,
            r#"<text x="{tx}" y="{:.1}" text-anchor="{anchor}">{v:.2}</text>"#,
            y + 4.0
        );
    }
}

/// Vertical bars with values in [0, 1].
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let mut s = header(title);
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    y_axis(&mut s, LEFT, 1.0, false);
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        H - BOTTOM,
        W - RIGHT
    );
    let slot = plot_w / bars.len().max(1) as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let h = plot_h * v.clamp(0.0, 1.0);
        let x = LEFT + slot * i as f64 + slot * 0.15;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{}"/>"#,
            H - BOTTOM - h,
            slot * 0.7,
            COLORS[0]
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x + slot * 0.35,
            H - BOTTOM + 18.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

type Series = (&'static str, Vec<Option<f64>>);

fn polyline(s: &mut String, xs: &[f64], ys: &[Option<f64>], x_range: (f64, f64), y_max: f64, color: &str) {
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let span = (x_range.1 - x_range.0).max(f64::MIN_POSITIVE);
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .filter_map(|(x, y)| {
            let y = (*y)?;
            let px = LEFT + plot_w * (x - x_range.0) / span;
            let py = H - BOTTOM - plot_h * (y / y_max).clamp(0.0, 1.0);
            Some(format!("{px:.1},{py:.1}"))
        })
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
        pts.join(" ")
    );
}

/// Line chart over `xs`: rates on the left axis in [0, 1], counts on a
/// right axis scaled to their maximum.
pub fn line_chart(title: &str, xs: &[f64], rates: &[Series], counts: &[Series]) -> String {
    let mut s = header(title);
    let x_range = (
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    y_axis(&mut s, LEFT, 1.0, false);
    let count_max = counts
        .iter()
        .flat_map(|(_, v)| v.iter().flatten())
        .copied()
        .fold(0.0, f64::max)
        .max(1.0);
    if !counts.is_empty() {
        y_axis(&mut s, W - RIGHT, count_max, true);
    }
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        H - BOTTOM,
        W - RIGHT
    );
    let plot_w = W - LEFT - RIGHT;
    let span = (x_range.1 - x_range.0).max(f64::MIN_POSITIVE);
    for x in xs {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x}</text>"#,
            LEFT + plot_w * (x - x_range.0) / span,
            H - BOTTOM + 18.0
        );
    }
    let all = rates
        .iter()
        .map(|r| (r, 1.0))
        .chain(counts.iter().map(|c| (c, count_max)));
    for (i, ((name, ys), max)) in all.enumerate() {
        let color = COLORS[i % COLORS.len()];
        polyline(&mut s, xs, ys, x_range, max, color);
        let ly = H - 18.0;
        let lx = LEFT + 140.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{}" width="12" height="4" fill="{color}"/>"#,
            ly - 4.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, lx + 16.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}
