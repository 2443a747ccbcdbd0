//! Static SVG phase portraits on the Poincaré disk.
//!
//! The closed northern hemisphere is projected onto `y3 = 0`, so the
//! equator is the unit circle and a planar point `(x, y)` lands at
//! `(x, y) / sqrt(1 + x² + y²)`.

use crate::report::AnalysisReport;
use ess_stab::certify::{to_sphere, Branch, LimitLabel};
use ess_stab::singular::{Kind, Singularity, Stability};
use std::fmt::Write;

const SIZE: f64 = 640.0;
const RADIUS: f64 = 290.0;

fn px(y: [f64; 3]) -> (f64, f64) {
    let c = SIZE / 2.0;
    (c + RADIUS * y[0], c - RADIUS * y[1])
}

fn polyline(out: &mut String, pts: impl IntoIterator<Item = [f64; 3]>, style: &str) {
    let mut d = String::new();
    for (k, y) in pts.into_iter().enumerate() {
        let (a, b) = px(y);
        let _ = write!(d, "{}{:.2},{:.2}", if k == 0 { "" } else { " " }, a, b);
    }
    if !d.is_empty() {
        let _ = writeln!(out, r#"<polyline points="{d}" {style}/>"#);
    }
}

/// Image of the line `x = c` (`vertical`) or `y = c`, endpoints on the
/// equator.
fn line_image(c: f64, vertical: bool) -> Vec<[f64; 3]> {
    (0..=400)
        .map(|k| {
            let th = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * k as f64 / 400.0;
            let (s, co) = th.sin_cos();
            let v = if vertical { [c * co, s, co] } else { [s, c * co, co] };
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / n, v[1] / n, v[2] / n]
        })
        .collect()
}

fn glyph(out: &mut String, y: [f64; 3], s: &Singularity) {
    let (a, b) = px(y);
    let fill = match s.stability {
        Stability::Stable => "#000000",
        Stability::Unstable => "#ffffff",
        _ => "#888888",
    };
    let style = format!(r##"fill="{fill}" stroke="#000000" stroke-width="1.2""##);
    match s.kind {
        Kind::HyperbolicSaddle => {
            let _ = writeln!(out, r#"<rect x="{:.2}" y="{:.2}" width="8" height="8" {style}/>"#, a - 4.0, b - 4.0);
        }
        Kind::HyperbolicNode => {
            let _ = writeln!(out, r#"<circle cx="{a:.2}" cy="{b:.2}" r="4.5" {style}/>"#);
        }
        Kind::HyperbolicFocus => {
            let _ = writeln!(out, r#"<circle cx="{a:.2}" cy="{b:.2}" r="4.5" {style}/>"#);
            let _ = writeln!(out, r##"<circle cx="{a:.2}" cy="{b:.2}" r="7.5" fill="none" stroke="#000000" stroke-width="0.8"/>"##);
        }
        Kind::DegenerateMonodromic => {
            let _ = writeln!(
                out,
                r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" {style}/>"#,
                a,
                b - 6.0,
                a + 6.0,
                b,
                a,
                b + 6.0,
                a - 6.0,
                b
            );
        }
        Kind::SemiHyperbolic => {
            let _ = writeln!(
                out,
                r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" {style}/>"#,
                a,
                b - 6.0,
                a + 5.5,
                b + 4.0,
                a - 5.5,
                b + 4.0
            );
        }
        Kind::NonSimple => {
            let _ = writeln!(
                out,
                r##"<path d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="#aa0000" stroke-width="2"/>"##,
                a - 5.0,
                b - 5.0,
                a + 5.0,
                b + 5.0,
                a - 5.0,
                b + 5.0,
                a + 5.0,
                b - 5.0
            );
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the report as an SVG document. Output depends only on the
/// report.
pub fn render_portrait(r: &AnalysisReport) -> String {
    let a = &r.analysis;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let c = SIZE / 2.0;
    let _ = writeln!(
        out,
        r##"<circle cx="{c}" cy="{c}" r="{RADIUS}" fill="none" stroke="#000000" stroke-width="1.5"/>"##
    );

    let square = a.polycycle.as_ref().is_some_and(|p| p.exists);
    for cst in [0.0, 1.0] {
        for vertical in [true, false] {
            polyline(&mut out, line_image(cst, vertical), r##"fill="none" stroke="#7f7f7f" stroke-width="1""##);
        }
    }
    if square {
        let edges = [
            ([0.0, 0.0], [1.0, 0.0]),
            ([1.0, 0.0], [1.0, 1.0]),
            ([1.0, 1.0], [0.0, 1.0]),
            ([0.0, 1.0], [0.0, 0.0]),
        ];
        for (p, q) in edges {
            let pts = (0..=50).map(|k| {
                let t = k as f64 / 50.0;
                to_sphere([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])])
            });
            polyline(&mut out, pts, r##"fill="none" stroke="#e67e22" stroke-width="3""##);
        }
    }

    for cyc in &a.cycles.cycles {
        let mut pts: Vec<[f64; 3]> = cyc.points.iter().map(|p| to_sphere(*p)).collect();
        if let Some(first) = pts.first().copied() {
            pts.push(first);
        }
        polyline(&mut out, pts, r##"fill="none" stroke="#27ae60" stroke-width="2""##);
    }

    for s in &a.skeleton.separatrices {
        let color = match s.branch {
            Branch::Unstable => "#c0392b",
            Branch::Stable => "#2471a3",
        };
        let dash = if s.label == LimitLabel::Unresolved { r#" stroke-dasharray="4 3""# } else { "" };
        polyline(
            &mut out,
            s.points.iter().copied(),
            &format!(r#"fill="none" stroke="{color}" stroke-width="1.2"{dash}"#),
        );
    }

    for s in &a.finite {
        if let Some((x, y)) = s.finite_xy() {
            glyph(&mut out, to_sphere([x, y]), s);
        }
    }
    for s in &a.infinite {
        glyph(&mut out, s.direction, &s.singularity);
    }

    let verdict = format!("{:?}", a.certificate.overall);
    let _ = writeln!(out, r#"<text x="12" y="22" font-family="monospace" font-size="14">{}</text>"#, escape(&verdict));
    let banner = a.finite_error.as_ref().or(a.infinite_error.as_ref());
    if let Some(msg) = banner {
        let _ = writeln!(
            out,
            r##"<rect x="0" y="{:.0}" width="{SIZE}" height="28" fill="#fdebd0"/>"##,
            SIZE - 28.0
        );
        let _ = writeln!(
            out,
            r#"<text x="12" y="{:.0}" font-family="monospace" font-size="13">degenerate field: {}</text>"#,
            SIZE - 9.0,
            escape(msg)
        );
    }
    out.push_str("</svg>\n");
    out
}
