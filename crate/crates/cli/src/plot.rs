//! Minimal deterministic SVG charts.
//!
//! These are a thin presentation layer over data that is already on disk as
//! CSV: a per-pixel line chart (standard errors, noise-to-signal) and a
//! matrix heatmap. The output is a pure function of the data — no
//! timestamps, random ids, or environment-dependent content — so identical
//! inputs produce byte-identical files.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const PLOT_X: f64 = 64.0;
const PLOT_Y: f64 = 48.0;
const PLOT_W: f64 = 520.0;
const PLOT_H: f64 = 300.0;

/// One line on a chart. Absent values break the line, leaving a gap.
pub struct Series {
    pub name: String,
    pub color: String,
    pub values: Vec<Option<f64>>,
    pub dashed: bool,
}

impl Series {
    pub fn solid(name: &str, color: &str, values: &[f64]) -> Self {
        Series {
            name: name.to_string(),
            color: color.to_string(),
            values: values.iter().map(|&v| Some(v)).collect(),
            dashed: false,
        }
    }

    pub fn dashed(name: &str, color: &str, values: Vec<Option<f64>>) -> Self {
        Series {
            name: name.to_string(),
            color: color.to_string(),
            values,
            dashed: true,
        }
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.4}")
    }
}

/// Per-pixel line chart: x axis is the pixel index (1-based), y axis starts
/// at zero.
pub fn line_chart(title: &str, y_label: &str, series: &[Series]) -> String {
    let n = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let y_max = series
        .iter()
        .flat_map(|s| s.values.iter().flatten())
        .fold(0.0f64, |m, &v| m.max(v))
        .max(1e-12)
        * 1.08;

    let x_of = |i: usize| {
        if n <= 1 {
            PLOT_X + PLOT_W / 2.0
        } else {
            PLOT_X + PLOT_W * i as f64 / (n - 1) as f64
        }
    };
    let y_of = |v: f64| PLOT_Y + PLOT_H * (1.0 - v / y_max);

    let mut svg = svg_open(title);

    // Axes and ticks.
    let _ = writeln!(
        svg,
        r##"  <rect x="{PLOT_X:.1}" y="{PLOT_Y:.1}" width="{PLOT_W:.1}" height="{PLOT_H:.1}" fill="none" stroke="#333" stroke-width="1"/>"##
    );
    for t in 0..=4 {
        let v = y_max * t as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r##"  <line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd" stroke-width="1"/>"##,
            PLOT_X,
            PLOT_X + PLOT_W
        );
        let _ = writeln!(
            svg,
            r##"  <text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end" fill="#333">{}</text>"##,
            PLOT_X - 6.0,
            y + 4.0,
            fmt_tick(v)
        );
    }
    for i in 0..n {
        let x = x_of(i);
        let _ = writeln!(
            svg,
            r##"  <text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle" fill="#333">{}</text>"##,
            PLOT_Y + PLOT_H + 16.0,
            i + 1
        );
    }
    let _ = writeln!(
        svg,
        r##"  <text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle" fill="#111">pixel</text>"##,
        PLOT_X + PLOT_W / 2.0,
        PLOT_Y + PLOT_H + 36.0
    );
    let _ = writeln!(
        svg,
        r##"  <text x="16" y="{:.1}" font-size="12" text-anchor="middle" fill="#111" transform="rotate(-90 16 {:.1})">{y_label}</text>"##,
        PLOT_Y + PLOT_H / 2.0,
        PLOT_Y + PLOT_H / 2.0
    );

    // Lines, broken at absent values, with point markers.
    for s in series {
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let mut run: Vec<(f64, f64)> = Vec::new();
        let flush = |run: &mut Vec<(f64, f64)>, svg: &mut String| {
            if run.len() >= 2 {
                let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
                let _ = writeln!(
                    svg,
                    r##"  <polyline points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"##,
                    pts.join(" "),
                    s.color
                );
            }
            run.clear();
        };
        for (i, v) in s.values.iter().enumerate() {
            match v {
                Some(v) => run.push((x_of(i), y_of(*v))),
                None => flush(&mut run, &mut svg),
            }
        }
        flush(&mut run, &mut svg);
        for (i, v) in s.values.iter().enumerate() {
            if let Some(v) = v {
                let _ = writeln!(
                    svg,
                    r##"  <circle cx="{:.1}" cy="{:.1}" r="3" fill="{}"/>"##,
                    x_of(i),
                    y_of(*v),
                    s.color
                );
            }
        }
    }

    // Legend, top-right inside the plot area.
    for (k, s) in series.iter().enumerate() {
        let y = PLOT_Y + 14.0 + 16.0 * k as f64;
        let x = PLOT_X + PLOT_W - 150.0;
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r##"  <line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="2"{dash}/>"##,
            x + 24.0,
            s.color
        );
        let _ = writeln!(
            svg,
            r##"  <text x="{:.1}" y="{:.1}" font-size="11" fill="#111">{}</text>"##,
            x + 30.0,
            y + 4.0,
            s.name
        );
    }

    svg.push_str("</svg>\n");
    svg
}

/// Matrix heatmap with per-cell values, rows labeled by pixel and columns by
/// detector pair.
pub fn heatmap(title: &str, rows: &[Vec<f64>]) -> String {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    let cell = 56.0;
    let x0 = 56.0;
    let y0 = 48.0;
    let w = x0 + nc as f64 * cell + 16.0;
    let h = y0 + nr as f64 * cell + 16.0;
    let v_max = rows
        .iter()
        .flatten()
        .fold(0.0f64, |m, &v| m.max(v))
        .max(1e-12);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"##
    );
    let _ = writeln!(
        svg,
        r##"  <rect width="{w:.0}" height="{h:.0}" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        svg,
        r##"  <text x="{:.1}" y="24" font-size="14" text-anchor="middle" fill="#111">{title}</text>"##,
        w / 2.0
    );

    for (r, row) in rows.iter().enumerate() {
        let _ = writeln!(
            svg,
            r##"  <text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end" fill="#333">b={}</text>"##,
            x0 - 6.0,
            y0 + (r as f64 + 0.5) * cell + 4.0,
            r + 1
        );
        for (c, &v) in row.iter().enumerate() {
            let t = (v / v_max).clamp(0.0, 1.0);
            // White at zero to a deep blue at the maximum.
            let red = (255.0 - t * (255.0 - 13.0)).round() as u8;
            let green = (255.0 - t * (255.0 - 71.0)).round() as u8;
            let blue = (255.0 - t * (255.0 - 161.0)).round() as u8;
            let text_fill = if t > 0.55 { "#ffffff" } else { "#11325a" };
            let x = x0 + c as f64 * cell;
            let y = y0 + r as f64 * cell;
            let _ = writeln!(
                svg,
                r##"  <rect x="{x:.1}" y="{y:.1}" width="{cell:.1}" height="{cell:.1}" fill="#{red:02x}{green:02x}{blue:02x}" stroke="#cccccc" stroke-width="0.5"/>"##
            );
            let _ = writeln!(
                svg,
                r##"  <text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle" fill="{text_fill}">{v:.2}</text>"##,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    for c in 0..nc {
        let _ = writeln!(
            svg,
            r##"  <text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle" fill="#333">d={}</text>"##,
            x0 + (c as f64 + 0.5) * cell,
            y0 - 8.0,
            c + 1
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn svg_open(title: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{HEIGHT:.0}" viewBox="0 0 {WIDTH:.0} {HEIGHT:.0}">"##
    );
    let _ = writeln!(
        svg,
        r##"  <rect width="{WIDTH:.0}" height="{HEIGHT:.0}" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        svg,
        r##"  <text x="{:.1}" y="24" font-size="14" text-anchor="middle" fill="#111">{title}</text>"##,
        WIDTH / 2.0
    );
    svg
}
