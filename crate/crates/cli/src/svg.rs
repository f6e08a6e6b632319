//! Deterministic SVG charts of power tables.

use std::fmt::Write as _;

use chisqalt_core::power::{ChartStyle, PowerTable};

use crate::CliError;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79",
];
const HIGHLIGHT: &str = "#d62728";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Series {
    name: String,
    highlight: bool,
    points: Vec<(f64, String, f64)>,
    mean: f64,
}

fn series(table: &PowerTable) -> Vec<Series> {
    let mut alphas: Vec<f64> = Vec::new();
    for r in &table.rows {
        if !alphas.contains(&r.alpha) {
            alphas.push(r.alpha);
        }
    }
    let mut out = Vec::new();
    for method in table.methods() {
        for &alpha in &alphas {
            let rows = table.rows_for(&method, alpha);
            if rows.is_empty() {
                continue;
            }
            let points: Vec<(f64, String, f64)> = rows.iter().map(|r| (r.param, r.label.clone(), r.power)).collect();
            let mean = points.iter().map(|p| p.2).sum::<f64>() / points.len() as f64;
            let name = if alphas.len() > 1 {
                format!("{method} (alpha {alpha})")
            } else {
                method.clone()
            };
            out.push(Series {
                name,
                highlight: method == "RG",
                points,
                mean,
            });
        }
    }
    // Legend order: mean value, highest first.
    out.sort_by(|a, b| b.mean.total_cmp(&a.mean).then_with(|| a.name.cmp(&b.name)));
    out
}

fn nice_max(v: f64) -> f64 {
    if v <= 1.0 {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    let m = v / mag;
    let step = [1.0, 2.0, 2.5, 5.0, 10.0].into_iter().find(|s| m <= *s).unwrap_or(10.0);
    step * mag
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Draws the table: a line per method over the parameter (or one bar group
/// per parameter label), legend ordered by mean value, RG highlighted.
pub fn render_svg(table: &PowerTable, style: ChartStyle, title: &str, x_label: &str, y_label: &str) -> Result<String, CliError> {
    if table.rows.is_empty() {
        return Err(CliError::Runtime("cannot draw an empty table".into()));
    }
    let all = series(table);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let y_max = nice_max(all.iter().flat_map(|s| s.points.iter().map(|p| p.2)).fold(0.0, f64::max));
    let y_of = |v: f64| TOP + plot_h * (1.0 - (v / y_max).clamp(0.0, 1.0));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    // Axes and horizontal grid.
    for i in 0..=5 {
        let v = y_max * i as f64 / 5.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#e0e0e0"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<polyline points="{LEFT},{TOP} {LEFT},{:.1} {:.1},{:.1}" fill="none" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    );

    let colour = |i: usize, s: &Series| if s.highlight { HIGHLIGHT } else { PALETTE[i % PALETTE.len()] };
    match style {
        ChartStyle::Line => {
            let xs: Vec<f64> = all.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
            let (mut lo, mut hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            if hi <= lo {
                lo -= 0.5;
                hi += 0.5;
            }
            let x_of = |x: f64| LEFT + plot_w * (x - lo) / (hi - lo);
            let mut ticks: Vec<(f64, String)> = Vec::new();
            for s in &all {
                for p in &s.points {
                    if !ticks.iter().any(|t| t.0 == p.0) {
                        ticks.push((p.0, p.1.clone()));
                    }
                }
            }
            ticks.sort_by(|a, b| a.0.total_cmp(&b.0));
            let every = ticks.len().div_ceil(11).max(1);
            for (x, label) in ticks.iter().step_by(every) {
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                    x_of(*x),
                    TOP + plot_h + 18.0,
                    escape(label)
                );
            }
            // Highlighted series last so it is drawn on top.
            let mut order: Vec<usize> = (0..all.len()).collect();
            order.sort_by_key(|&i| all[i].highlight);
            for i in order {
                let s = &all[i];
                let c = colour(i, s);
                let width = if s.highlight { 3.0 } else { 1.5 };
                let pts: Vec<String> = s.points.iter().map(|p| format!("{:.1},{:.1}", x_of(p.0), y_of(p.2))).collect();
                if pts.len() > 1 {
                    let _ = writeln!(
                        svg,
                        r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="{width}"/>"#,
                        pts.join(" ")
                    );
                }
                let r = if s.highlight { 4.0 } else { 2.5 };
                for p in &s.points {
                    let _ = writeln!(
                        svg,
                        r#"<circle cx="{:.1}" cy="{:.1}" r="{r}" fill="{c}"/>"#,
                        x_of(p.0),
                        y_of(p.2)
                    );
                }
            }
        }
        ChartStyle::Bar => {
            // Groups keep table order, not legend order.
            let mut table_order: Vec<String> = Vec::new();
            for r in &table.rows {
                if !table_order.contains(&r.label) {
                    table_order.push(r.label.clone());
                }
            }
            let group_w = plot_w / table_order.len() as f64;
            let bar_w = group_w * 0.8 / all.len() as f64;
            for (g, label) in table_order.iter().enumerate() {
                let x0 = LEFT + group_w * g as f64 + group_w * 0.1;
                for (i, s) in all.iter().enumerate() {
                    if let Some(p) = s.points.iter().find(|p| &p.1 == label) {
                        let y = y_of(p.2);
                        let _ = writeln!(
                            svg,
                            r#"<rect x="{:.1}" y="{y:.1}" width="{bar_w:.1}" height="{:.1}" fill="{}"/>"#,
                            x0 + bar_w * i as f64,
                            TOP + plot_h - y,
                            colour(i, s)
                        );
                    }
                }
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                    LEFT + group_w * (g as f64 + 0.5),
                    TOP + plot_h + 18.0,
                    escape(label)
                );
            }
        }
    }

    // Legend.
    let lx = LEFT + plot_w + 16.0;
    for (i, s) in all.iter().enumerate() {
        let y = TOP + 8.0 + 18.0 * i as f64;
        let c = colour(i, s);
        let weight = if s.highlight { r#" font-weight="bold""# } else { "" };
        let _ = writeln!(svg, r#"<rect x="{lx:.1}" y="{:.1}" width="12" height="12" fill="{c}"/>"#, y - 10.0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{y:.1}"{weight}>{} ({:.1}%)</text>"#,
            lx + 18.0,
            escape(&s.name),
            100.0 * s.mean
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
