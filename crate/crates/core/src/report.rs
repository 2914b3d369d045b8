//! Report output: signature charts as SVG and overlap tables as CSV/text.

use std::fmt::Write;

use crate::model::{LandUseLabel, TemporalSignature, HOURS};
use crate::overlap::OverlapReport;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Line chart of one or more signatures over hours 0–23 with a dashed guide
/// at the mean value 1.
pub fn signature_svg(title: &str, series: &[(&str, &TemporalSignature)]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 56.0;
    const RIGHT: f64 = 150.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 48.0;
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;

    let peak = series
        .iter()
        .flat_map(|(_, s)| s.values().iter().copied())
        .fold(1.0_f64, f64::max);
    let y_max = (peak * 1.1 / 0.5).ceil() * 0.5;
    let x = |h: usize| LEFT + plot_w * h as f64 / (HOURS - 1) as f64;
    let y = |v: f64| TOP + plot_h * (1.0 - v / y_max);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<path d="M{LEFT},{TOP} V{} H{}" fill="none" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w
    )
    .unwrap();
    for h in 0..HOURS {
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{h}</text>"#,
            x(h),
            TOP + plot_h + 16.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">hour of day</text>"#,
        LEFT + plot_w / 2.0,
        H - 8.0
    )
    .unwrap();
    let mut tick = 0.0;
    while tick <= y_max + 1e-9 {
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{tick:.1}</text>"#,
            LEFT - 6.0,
            y(tick) + 4.0
        )
        .unwrap();
        tick += 0.5;
    }
    writeln!(
        svg,
        r##"<line x1="{LEFT}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="#888" stroke-dasharray="4 3"/>"##,
        y(1.0),
        LEFT + plot_w
    )
    .unwrap();

    for (i, (name, sig)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = sig
            .values()
            .iter()
            .enumerate()
            .map(|(h, &v)| format!("{:.1},{:.1}", x(h), y(v)))
            .collect();
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        )
        .unwrap();
        let ly = TOP + 16.0 * i as f64 + 8.0;
        writeln!(
            svg,
            r#"<line x1="{0:.1}" y1="{ly:.1}" x2="{1:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{2:.1}" y="{3:.1}">{4}</text>"#,
            W - RIGHT + 12.0,
            W - RIGHT + 32.0,
            W - RIGHT + 38.0,
            ly + 4.0,
            escape(name)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per cluster: its predicted label and the headline percentage in
/// the matching official-land-use column, `-` elsewhere.
pub fn overlap_table_csv(reports: &[OverlapReport]) -> String {
    let mut out = String::from("cluster,predicted_land_use");
    for l in LandUseLabel::ALL {
        write!(out, ",{l}").unwrap();
    }
    out.push('\n');
    for r in reports {
        write!(out, "{},{}", csv_field(&r.cluster_id), r.predicted_label).unwrap();
        for l in LandUseLabel::ALL {
            if l == r.predicted_label {
                write!(out, ",{:.1}", r.headline_pct).unwrap();
            } else {
                out.push_str(",-");
            }
        }
        out.push('\n');
    }
    out
}

/// Every zone row of every report with all three overlap definitions.
pub fn overlap_detail_csv(reports: &[OverlapReport]) -> String {
    let mut out = String::from(
        "cluster,predicted_land_use,zone,zone_label,intersection_area_m2,zone_area_m2,pct_of_cluster,pct_of_zone,iou\n",
    );
    for r in reports {
        writeln!(
            out,
            "{},{},*,{},{:.3},{:.3},{:.4},{:.4},{:.4}",
            csv_field(&r.cluster_id),
            r.predicted_label,
            r.predicted_label,
            r.intersection_area_m2,
            r.overlapped_zone_area_m2,
            r.pct_of_cluster,
            r.pct_of_zone,
            r.iou
        )
        .unwrap();
        for z in &r.rows {
            writeln!(
                out,
                "{},{},{},{},{:.3},{:.3},{:.4},{:.4},{:.4}",
                csv_field(&r.cluster_id),
                r.predicted_label,
                csv_field(&z.source_id),
                z.label,
                z.intersection_area_m2,
                z.zone_area_m2,
                z.pct_of_cluster,
                z.pct_of_zone,
                z.iou
            )
            .unwrap();
        }
    }
    out
}

/// Plain-text rendering of [`overlap_table_csv`].
pub fn overlap_table_text(title: &str, reports: &[OverlapReport]) -> String {
    let widths = [12usize, 13, 12, 12, 12, 12];
    let mut out = String::new();
    writeln!(out, "{title}").unwrap();
    write!(
        out,
        "{:<w0$} {:<w1$}",
        "Cluster",
        "Predicted",
        w0 = widths[0],
        w1 = widths[1]
    )
    .unwrap();
    for (l, w) in LandUseLabel::ALL.iter().zip(&widths[2..]) {
        write!(out, " {:>w$}", l.as_str(), w = *w).unwrap();
    }
    out.push('\n');
    for r in reports {
        write!(
            out,
            "{:<w0$} {:<w1$}",
            r.cluster_id,
            r.predicted_label.as_str(),
            w0 = widths[0],
            w1 = widths[1]
        )
        .unwrap();
        for (l, w) in LandUseLabel::ALL.iter().zip(&widths[2..]) {
            let cell = if *l == r.predicted_label {
                format!("{:.1}%", r.headline_pct)
            } else {
                "-".into()
            };
            write!(out, " {cell:>w$}", w = *w).unwrap();
        }
        out.push('\n');
    }
    out
}
