//! Small static SVG charts: the hit-rate curve of a tournament and per-class
//! AP over training epochs.

use std::fmt::Write as _;

use crate::aggregation::HitRateCurve;
use crate::manifest::Technique;
use crate::model::TrainHistory;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 48.0;

const PALETTE: [&str; 7] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
];

struct Frame {
    x_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        LEFT + (W - LEFT - RIGHT) * (v - 1.0) / (self.x_max - 1.0).max(1.0)
    }

    fn y(&self, v: f64) -> f64 {
        TOP + (H - TOP - BOTTOM) * (1.0 - v)
    }
}

fn open(out: &mut String, title: &str, x_label: &str, y_label: &str, frame: &Frame) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="16" text-anchor="middle" font-size="13">{title}</text>"#, W / 2.0);
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let y = frame.y(v);
        let _ = writeln!(
            out,
            "<line x1=\"{LEFT}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>",
            W - RIGHT
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_label}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{y_label}</text>"#,
        H / 2.0,
        H / 2.0
    );
}

fn x_ticks(out: &mut String, frame: &Frame) {
    let n = frame.x_max as usize;
    let step = (n / 8).max(1);
    let mut k = 1;
    while k <= n {
        let x = frame.x(k as f64);
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{k}</text>"#,
            H - BOTTOM + 16.0
        );
        k += step;
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str) {
    if pts.is_empty() {
        return;
    }
    let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
        path.join(" ")
    );
}

/// Win-count threshold against hit rate, with one marker per candidate in
/// ranked order colored by tier (hollow markers did not pass).
pub fn hitrate_svg(curve: &HitRateCurve, title: &str) -> String {
    let frame = Frame {
        x_max: curve.points.len().max(2) as f64,
    };
    let mut out = String::new();
    open(&mut out, title, "top-k predicted candidates", "hit rate", &frame);
    x_ticks(&mut out, &frame);
    let pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .map(|&(k, r)| (frame.x(k as f64), frame.y(r)))
        .collect();
    polyline(&mut out, &pts, "#333");
    let base_y = frame.y(0.0) - 6.0;
    for c in &curve.candidates {
        let color = PALETTE[c.tier.clamp(0, 6) as usize];
        let fill = if c.passed { color } else { "none" };
        let _ = writeln!(
            out,
            r#"<circle cx="{:.1}" cy="{base_y:.1}" r="3" fill="{fill}" stroke="{color}"><title>{} wins={} tier={}</title></circle>"#,
            frame.x(c.rank as f64),
            c.candidate_id,
            c.win_count,
            c.tier
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Average precision per technique class over epochs.
pub fn ap_epochs_svg(history: &TrainHistory, title: &str) -> String {
    let series = history.ap_series();
    let frame = Frame {
        x_max: history.records.len().max(2) as f64,
    };
    let mut out = String::new();
    open(&mut out, title, "epoch", "average precision", &frame);
    x_ticks(&mut out, &frame);
    for (c, s) in series.iter().enumerate() {
        let color = PALETTE[c % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s
            .iter()
            .enumerate()
            .filter_map(|(e, ap)| ap.map(|v| (frame.x((e + 1) as f64), frame.y(v))))
            .collect();
        polyline(&mut out, &pts, color);
        let name = Technique::ALL.get(c).map_or("class", |t| t.as_str());
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{name}</text>"#,
            LEFT + 8.0 + 80.0 * (c % 7) as f64,
            TOP + 12.0
        );
    }
    out.push_str("</svg>\n");
    out
}
