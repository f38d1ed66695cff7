//! Small hand-written SVG charts. Percentages only, so the y axis is 0-100.

use std::fmt::Write as _;

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 48.0;

fn frame(title: &str, body: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    for tick in [0, 25, 50, 75, 100] {
        let y = y_of(tick as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{PAD}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{tick}</text>"##,
            W - PAD / 2.0,
            PAD - 6.0,
            y + 4.0
        );
    }
    s.push_str(body);
    s.push_str("</svg>\n");
    s
}

fn y_of(v: f64) -> f64 {
    H - PAD - (v.clamp(0.0, 100.0) / 100.0) * (H - 2.0 * PAD)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn bar_chart(title: &str, bars: &[(&str, f64)]) -> String {
    let mut body = String::new();
    let slot = (W - 1.5 * PAD) / bars.len().max(1) as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let x = PAD + i as f64 * slot + slot * 0.2;
        let y = y_of(*v);
        let _ = writeln!(
            body,
            r##"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="#4a7ab5"/>"##,
            slot * 0.6,
            H - PAD - y
        );
        let cx = x + slot * 0.3;
        let _ = writeln!(
            body,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text><text x="{cx:.1}" y="{:.1}" text-anchor="middle">{v:.1}</text>"#,
            H - PAD + 16.0,
            escape(label),
            y - 4.0
        );
    }
    frame(title, &body)
}

/// One polyline with a marker per point; x values are spread evenly.
pub fn line_chart(title: &str, x_label: &str, points: &[(f64, f64)]) -> String {
    let mut body = String::new();
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x_of = |x: f64| {
        if points.len() == 1 {
            W / 2.0
        } else {
            PAD + (x - lo) / span * (W - 2.0 * PAD)
        }
    };
    let path: Vec<String> = points.iter().map(|p| format!("{:.1},{:.1}", x_of(p.0), y_of(p.1))).collect();
    let _ = writeln!(
        body,
        r##"<polyline points="{}" fill="none" stroke="#4a7ab5" stroke-width="2"/>"##,
        path.join(" ")
    );
    for p in points {
        let (x, y) = (x_of(p.0), y_of(p.1));
        let _ = writeln!(
            body,
            r##"<circle class="point" cx="{x:.1}" cy="{y:.1}" r="4" fill="#c0392b"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            H - PAD + 16.0,
            p.0
        );
    }
    let _ = writeln!(body, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 10.0, escape(x_label));
    frame(title, &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_marker_per_point() {
        let s = line_chart("SR", "qubits", &[(4.0, 10.0), (6.0, 20.0), (8.0, 15.0)]);
        assert_eq!(s.matches("class=\"point\"").count(), 3);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        let b = bar_chart("m", &[("SR", 50.0), ("UF", 75.0)]);
        assert_eq!(b.matches("<rect").count(), 3);
    }
}
