//! Grouped-bar latency chart as standalone SVG text.

use std::fmt::Write;
use std::path::Path;

use crate::report::{write_file, BenchReport};
use crate::BenchError;

pub const SERIES: [(&str, &str); 4] = [
    ("simulated", "#1f77b4"),
    ("scalar baseline", "#ff7f0e"),
    ("published HPDP", "#2ca02c"),
    ("published GR740", "#d62728"),
];

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 90.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn svg_string(report: &BenchReport) -> String {
    let groups: Vec<(&str, [Option<f64>; 4])> = report
        .rows
        .iter()
        .map(|r| (r.name.as_str(), [Some(r.sim_ms), Some(r.baseline_ms), r.paper_hpdp_ms, r.paper_gr740_ms]))
        .collect();
    let values: Vec<f64> = groups.iter().flat_map(|g| g.1).flatten().filter(|v| *v > 0.0).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    let (e_lo, e_hi) = if values.is_empty() {
        (0, 1)
    } else {
        let a = lo.log10().floor() as i32;
        (a, (hi.log10().ceil() as i32).max(a + 1))
    };
    let plot_h = HEIGHT - TOP - BOTTOM;
    let plot_w = WIDTH - LEFT - RIGHT;
    let y_of = |v: f64| TOP + plot_h * (1.0 - (v.log10() - f64::from(e_lo)) / f64::from(e_hi - e_lo));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<title>Convolution latency by layer (ms, log scale)</title>"#);
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
    let _ = writeln!(s, r#"<g class="axis">"#);
    for e in e_lo..=e_hi {
        let y = y_of(10f64.powi(e));
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{e}</text>"##,
            WIDTH - RIGHT,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r##"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">latency (ms)</text>"##,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    let _ = writeln!(s, "</g>");

    let n = groups.len().max(1) as f64;
    let group_w = plot_w / n;
    let bar_w = group_w * 0.8 / SERIES.len() as f64;
    for (i, (name, vals)) in groups.iter().enumerate() {
        let x0 = LEFT + group_w * i as f64 + group_w * 0.1;
        let _ = writeln!(s, r#"<g class="case" data-case="{}">"#, escape(name));
        for (j, v) in vals.iter().enumerate() {
            let Some(v) = v.filter(|v| *v > 0.0) else { continue };
            let y = y_of(v);
            let _ = writeln!(
                s,
                r#"<rect class="bar" data-series="{}" x="{:.1}" y="{y:.1}" width="{bar_w:.1}" height="{:.1}" fill="{}"><title>{}: {v:.3} ms</title></rect>"#,
                SERIES[j].0,
                x0 + bar_w * j as f64,
                (TOP + plot_h - y).max(0.0),
                SERIES[j].1,
                SERIES[j].0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x0 + group_w * 0.4,
            TOP + plot_h + 16.0,
            escape(name)
        );
        let _ = writeln!(s, "</g>");
    }

    let _ = writeln!(s, r#"<g class="legend">"#);
    for (j, (label, color)) in SERIES.iter().enumerate() {
        let x = LEFT + 150.0 * j as f64;
        let y = HEIGHT - 30.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="12" height="12" fill="{color}"/><text x="{:.1}" y="{y:.1}">{label}</text>"#,
            y - 10.0,
            x + 16.0
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

pub fn emit_chart(report: &BenchReport, path: &Path) -> Result<(), BenchError> {
    write_file(path, svg_string(report).as_bytes())
}
