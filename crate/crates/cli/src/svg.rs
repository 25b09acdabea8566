//! Dependency-free SVG plots. Every plotted value is also written to CSV or
//! JSON by the calling command.

use std::fmt::Write;

use wlr_core::geometry::VorSweep;
use wlr_core::threshold::{AxisLimits, TrialRecord};

use crate::formats::ContourRecord;

const MARGIN: f64 = 60.0;

fn header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Blue (negative) through white to red (positive), `t` in [-1, 1].
fn diverging(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let fade = |c: f64| (255.0 * (1.0 - t.abs()) + c * t.abs()).round() as u8;
    if t >= 0.0 {
        format!("rgb({},{},{})", fade(200.0), fade(30.0), fade(30.0))
    } else {
        format!("rgb({},{},{})", fade(30.0), fade(60.0), fade(200.0))
    }
}

/// Disparity error per (yaw, point) cell.
pub fn sweep_heatmap(sweep: &VorSweep) -> String {
    let cols = sweep.samples.len().max(1);
    let rows = sweep.summaries.len().max(1);
    let cell_w = (600.0 / cols as f64).max(2.0);
    let cell_h = (400.0 / rows as f64).clamp(2.0, 24.0);
    let width = 2.0 * MARGIN + 60.0 + cell_w * cols as f64;
    let height = 2.0 * MARGIN + cell_h * rows as f64;
    let scale = sweep
        .summaries
        .iter()
        .map(|s| s.max_abs_disparity_err_arcmin)
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .max(1e-12);

    let mut svg = header(width, height);
    let x0 = MARGIN + 60.0;
    for (c, sample) in sweep.samples.iter().enumerate() {
        for (r, record) in sample.records.iter().enumerate() {
            let fill = match &record.result {
                Ok(e) => diverging(e.disparity_err_arcmin / scale),
                Err(_) => "rgb(160,160,160)".into(),
            };
            let _ = writeln!(
                svg,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\"/>",
                x0 + c as f64 * cell_w,
                MARGIN + r as f64 * cell_h,
                cell_w,
                cell_h
            );
        }
    }
    if cell_h >= 10.0 {
        for (r, s) in sweep.summaries.iter().enumerate() {
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
                x0 - 4.0,
                MARGIN + (r as f64 + 0.7) * cell_h,
                escape(&s.point_id)
            );
        }
    }
    if let (Some(first), Some(last)) = (sweep.samples.first(), sweep.samples.last()) {
        let y = MARGIN + rows as f64 * cell_h + 16.0;
        let _ = writeln!(svg, "<text x=\"{x0:.2}\" y=\"{y:.2}\">{}°</text>", first.yaw_deg);
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{y:.2}\" text-anchor=\"end\">{}°</text>",
            x0 + cols as f64 * cell_w,
            last.yaw_deg
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{x0:.2}\" y=\"{:.2}\">disparity error vs head yaw (±{scale:.3} arcmin full scale)</text>",
        MARGIN - 20.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Threshold contour over the search window, with the trials when given.
pub fn contour_plot(record: &ContourRecord, limits: &AxisLimits, trials: &[TrialRecord]) -> String {
    let side = 400.0;
    let size = side + 2.0 * MARGIN;
    let px = |x: f64| MARGIN + (x / limits.x_mm + 1.0) * 0.5 * side;
    let pz = |z: f64| MARGIN + (1.0 - z / limits.z_mm) * 0.5 * side;

    let mut svg = header(size, size);
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{side}\" height=\"{side}\" fill=\"none\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN}\" y1=\"{c:.2}\" x2=\"{:.2}\" y2=\"{c:.2}\" stroke=\"#bbb\"/>\n\
         <line x1=\"{c:.2}\" y1=\"{MARGIN}\" x2=\"{c:.2}\" y2=\"{:.2}\" stroke=\"#bbb\"/>",
        MARGIN + side,
        MARGIN + side,
        c = MARGIN + 0.5 * side
    );
    for t in trials {
        let color = if t.correct { "#2a8a2a" } else { "#c03030" };
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\" fill-opacity=\"0.6\"/>",
            px(t.x_err_mm),
            pz(t.z_err_mm)
        );
    }
    if !record.vertices.is_empty() {
        let points: Vec<String> = record
            .vertices
            .iter()
            .map(|[x, z]| format!("{:.2},{:.2}", px(*x), pz(*z)))
            .collect();
        let dash = if record.fully_censored { " stroke-dasharray=\"6 4\"" } else { "" };
        let _ = writeln!(
            svg,
            "<polygon points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"{dash}/>",
            points.join(" ")
        );
    }
    let area = record
        .area_mm2
        .map_or_else(|| "fully censored".to_string(), |a| format!("area {a:.1} mm²"));
    let _ = writeln!(
        svg,
        "<text x=\"{MARGIN}\" y=\"{:.2}\">{} / {}: p = {} contour, {area}</text>",
        MARGIN - 20.0,
        escape(&record.subject),
        escape(&record.condition),
        record.p_target
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">x error (±{} mm)</text>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 {:.2} {:.2})\">z error (±{} mm)</text>",
        MARGIN + 0.5 * side,
        MARGIN + side + 30.0,
        limits.x_mm,
        MARGIN - 20.0,
        MARGIN + 0.5 * side,
        MARGIN - 20.0,
        MARGIN + 0.5 * side,
        limits.z_mm
    );
    svg.push_str("</svg>\n");
    svg
}

/// File-name-safe form of a label.
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
