//! Minimal SVG overlap figure: two density curves, the shaded pointwise
//! minimum and the OA value in the legend.

use std::fmt::Write as _;

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

pub struct Figure<'a> {
    pub title: String,
    pub x_label: String,
    pub xs: &'a [f64],
    pub a: &'a [f64],
    pub b: &'a [f64],
    pub a_label: &'a str,
    pub b_label: &'a str,
    pub oa: f64,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(f: &Figure) -> String {
    let (x0, x1) = (f.xs[0], f.xs[f.xs.len() - 1]);
    let y1 = f.a.iter().chain(f.b).copied().fold(0.0f64, f64::max).max(f64::MIN_POSITIVE) * 1.05;
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |x: f64| LEFT + (x - x0) / span * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - y / y1 * (H - TOP - BOTTOM);
    let points = |ys: &[f64]| {
        f.xs.iter()
            .zip(ys)
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(&f.title)
    );

    // shaded overlap
    let min: Vec<f64> = f.a.iter().zip(f.b).map(|(a, b)| a.min(*b)).collect();
    let mut poly = points(&min);
    let _ = write!(
        poly,
        " {:.2},{:.2} {:.2},{:.2}",
        px(x1),
        py(0.0),
        px(x0),
        py(0.0)
    );
    let _ = writeln!(s, r##"<polygon points="{poly}" fill="#9e9e9e" fill-opacity="0.45" stroke="none"/>"##);
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
        points(f.a)
    );
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#ff7f0e" stroke-width="2" stroke-dasharray="6 3"/>"##,
        points(f.b)
    );

    // axes and ticks
    let (ax0, ax1, ay0, ay1) = (px(x0), px(x1), py(0.0), py(y1));
    let _ = writeln!(
        s,
        r#"<path d="M{ax0:.2},{ay1:.2} L{ax0:.2},{ay0:.2} L{ax1:.2},{ay0:.2}" fill="none" stroke="black"/>"#
    );
    for i in 0..=TICKS {
        let t = i as f64 / TICKS as f64;
        let (xv, yv) = (x0 + t * span, t * y1);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.3}</text>"#,
            px(xv),
            ay0 + 18.0,
            xv
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.3}</text>"#,
            ax0 - 6.0,
            py(yv) + 4.0,
            yv
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (ax0 + ax1) / 2.0,
        H - 16.0,
        escape(&f.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">density</text>"#,
        (ay0 + ay1) / 2.0,
        (ay0 + ay1) / 2.0
    );

    // legend
    let lx = W - RIGHT - 210.0;
    let _ = writeln!(
        s,
        r##"<rect x="{lx:.1}" y="{:.1}" width="200" height="66" fill="white" stroke="#cccccc"/>"##,
        TOP
    );
    let rows = [
        (r##"stroke="#1f77b4" stroke-width="2""##, f.a_label),
        (r##"stroke="#ff7f0e" stroke-width="2" stroke-dasharray="6 3""##, f.b_label),
    ];
    for (i, (style, label)) in rows.iter().enumerate() {
        let y = TOP + 16.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" {style}/>"#,
            lx + 8.0,
            lx + 36.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 44.0, y + 4.0, escape(label));
    }
    let y = TOP + 52.0;
    let _ = writeln!(
        s,
        r##"<rect x="{:.1}" y="{:.1}" width="28" height="10" fill="#9e9e9e" fill-opacity="0.45"/>"##,
        lx + 8.0,
        y - 5.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" data-oa="{}">OA = {}</text>"#,
        lx + 44.0,
        y + 4.0,
        f.oa,
        f.oa
    );
    s.push_str("</svg>\n");
    s
}

/// Reads the OA value back out of a rendered figure.
#[cfg(test)]
pub fn legend_oa(svg: &str) -> Option<f64> {
    let start = svg.find("data-oa=\"")? + 9;
    let end = start + svg[start..].find('"')?;
    svg[start..end].parse().ok()
}
