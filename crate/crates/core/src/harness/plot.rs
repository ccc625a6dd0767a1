//! Minimal SVG line plot of risk curves with a chance line at 0.5.

use std::fmt::Write;

use crate::error::{Error, Result};

use super::experiment::CurvePoint;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders named curves; y spans [0, 1] unless a curve leaves that range.
pub fn render_svg(title: &str, series: &[(String, Vec<CurvePoint>)]) -> Result<String> {
    if series.is_empty() || series.iter().all(|(_, c)| c.is_empty()) {
        return Err(Error::InvalidArgument("nothing to plot".into()));
    }
    let points = series.iter().flat_map(|(_, c)| c.iter());
    let t_max = points.clone().map(|p| p.t).max().unwrap_or(1).max(1) as f64;
    let t_min = points.clone().map(|p| p.t).min().unwrap_or(0) as f64;
    let y_lo = points.clone().map(|p| p.mean - p.stderr).fold(0.0, f64::min);
    let y_hi = points.map(|p| p.mean + p.stderr).fold(1.0, f64::max);
    let span_t = (t_max - t_min).max(1.0);
    let x = |t: f64| MARGIN + (t - t_min) / span_t * (W - 2.0 * MARGIN);
    let y = |v: f64| H - MARGIN - (v - y_lo) / (y_hi - y_lo) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    // axes
    let _ = writeln!(
        s,
        r#"<path d="M{m},{t} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    for k in 0..=4 {
        let v = y_lo + (y_hi - y_lo) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"#, MARGIN - 5.0, y(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">queries t</text>"#, W / 2.0, H - 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, W - MARGIN, H - MARGIN + 15.0, t_max);
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{y5:.1}" x2="{}" y2="{y5:.1}" stroke="#888" stroke-dasharray="4 4"/>"##,
        MARGIN,
        W - MARGIN,
        y5 = y(0.5)
    );
    for (n, (name, curve)) in series.iter().enumerate() {
        let color = COLORS[n % COLORS.len()];
        let path: Vec<String> = curve
            .iter()
            .map(|p| format!("{:.1},{:.1}", x(p.t as f64), y(p.mean)))
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" stroke="{color}" fill="none"/>"#, path.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            MARGIN + 10.0,
            MARGIN + 15.0 * (n as f64 + 1.0),
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
