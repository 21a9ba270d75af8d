//! Static grouped bar chart of the headline metrics.

use std::fmt::Write;

use crate::pipeline::RunReport;

const METRICS: [&str; 4] = ["Acc", "Pre_w", "Recall_w", "F1_w"];
const COLORS: [&str; 4] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn bar_chart_svg(report: &RunReport) -> String {
    let reports = report.ok_reports();
    let (bar, gap, left, top, plot_h) = (14.0, 24.0, 50.0, 30.0, 300.0);
    let group = bar * METRICS.len() as f64 + gap;
    let width = left + group * reports.len().max(1) as f64 + 20.0;
    let height = top + plot_h + 110.0;
    let y = |v: f64| top + plot_h * (1.0 - v / 100.0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, "<!-- {} -->", escape(&report.manifest.line()));
    for tick in (0..=100).step_by(20) {
        let ty = y(tick as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{ty}" x2="{}" y2="{ty}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{tick}</text>"##,
            width - 20.0,
            left - 4.0,
            ty + 4.0
        );
    }
    for (g, r) in reports.iter().enumerate() {
        let x0 = left + gap / 2.0 + g as f64 * group;
        for (m, v) in [r.accuracy, r.precision_w, r.recall_w, r.f1_w].into_iter().enumerate() {
            let x = x0 + m as f64 * bar;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{}" width="{bar}" height="{}" fill="{}"><title>{} {}: {v:.2}</title></rect>"#,
                y(v),
                plot_h * v / 100.0,
                COLORS[m],
                escape(&r.algorithm),
                METRICS[m]
            );
        }
        let cx = x0 + bar * METRICS.len() as f64 / 2.0;
        let ly = top + plot_h + 12.0;
        let _ = writeln!(
            s,
            r#"<text x="{cx}" y="{ly}" text-anchor="end" transform="rotate(-35 {cx} {ly})">{}</text>"#,
            escape(&r.algorithm)
        );
    }
    for (m, name) in METRICS.iter().enumerate() {
        let x = left + m as f64 * 80.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="8" width="10" height="10" fill="{}"/><text x="{}" y="17">{name}</text>"#,
            COLORS[m],
            x + 14.0
        );
    }
    s.push_str("</svg>\n");
    s
}
