use std::fmt::Write as _;

use crate::error::{Error, Result};

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// `(radius_m, visibility)` pairs from a radial-profile CSV; empty bins
/// are skipped.
pub fn parse_profile_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(crate::stackio::PROFILE_HEADER) {
        return Err(Error::invalid("profile", "missing `radius_m,visibility,samples` header"));
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let parsed = (fields.len() == 3)
            .then(|| Some((fields[0].parse::<f64>().ok()?, fields[1].parse::<f64>().ok()?)))
            .flatten();
        let Some((r, v)) = parsed else {
            return Err(Error::Config {
                line: i + 2,
                message: format!("malformed profile row `{line}`"),
            });
        };
        if v.is_finite() {
            points.push((r, v));
        }
    }
    Ok(points)
}

/// Line plot of visibility against camera radius in millimetres.
pub fn profiles_svg(series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, left, bottom, top, right) = (640.0, 420.0, 60.0, 50.0, 20.0, 20.0);
    let x_max = series
        .iter()
        .flat_map(|(_, p)| p.iter().map(|&(r, _)| r * 1e3))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let y_max = 1.05;
    let sx = |r: f64| left + (w - left - right) * r / x_max;
    let sy = |v: f64| h - bottom - (h - bottom - top) * v.clamp(0.0, y_max) / y_max;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{left},{top} V{} H{}" fill="none" stroke="black"/>"#,
        h - bottom,
        w - right
    );
    for k in 0..=5 {
        let v = 0.2 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.1}</text>"#,
            left - 6.0,
            sy(v) + 4.0
        );
        let r = x_max * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{r:.2}</text>"#,
            sx(r),
            h - bottom + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">radius on camera (mm)</text>"#,
        left + (w - left - right) / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">visibility</text>"#,
        top + (h - top - bottom) / 2.0,
        top + (h - top - bottom) / 2.0
    );
    for (i, (label, points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = points
            .iter()
            .map(|&(r, v)| format!("{:.2},{:.2}", sx(r * 1e3), sy(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        let y = top + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" fill="{color}" text-anchor="end">{}</text>"#,
            w - right - 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
