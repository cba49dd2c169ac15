//! Minimal static SVG rendering of step functions.

use std::fmt::Write as _;

use crate::density::StepFunction;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 40.0;

/// Renders `f` over `[-1/2, 1/2]` as a step polyline with a bare x axis at
/// zero and a y axis at the left edge.
pub fn step_function_svg(f: &StepFunction, title: &str) -> String {
    let top = f
        .values()
        .iter()
        .map(|v| v.to_f64())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let sx = |x: f64| MARGIN + (x + 0.5) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - y / top * (HEIGHT - 2.0 * MARGIN);

    let mut points = vec![(sx(-0.5), sy(0.0))];
    for p in f.plateaus() {
        let (l, r, v) = (p.left.to_f64(), p.right.to_f64(), p.value.to_f64());
        points.push((sx(l), points.last().map_or(sy(0.0), |&(_, y)| y)));
        points.push((sx(l), sy(v)));
        points.push((sx(r), sy(v)));
    }
    if let Some(&(x, _)) = points.last() {
        points.push((x, sy(0.0)));
    }
    points.push((sx(0.5), sy(0.0)));

    let mut path = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        if i > 0 {
            path.push(' ');
        }
        let _ = write!(path, "{x:.3},{y:.3}");
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, "<title>{}</title>", escape(title));
    let _ = writeln!(
        svg,
        r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="black"/>"#,
        sx(-0.5),
        sy(0.0),
        sx(0.5),
        sy(0.0)
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="black"/>"#,
        sx(-0.5),
        sy(0.0),
        sx(-0.5),
        sy(top)
    );
    for (x, label) in [(-0.5, "-1/2"), (0.0, "0"), (0.5, "1/2")] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" font-size="12" text-anchor="middle">{label}</text>"#,
            sx(x),
            sy(0.0) + 16.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.3}" y="{:.3}" font-size="12" text-anchor="end">{top:.4}</text>"#,
        sx(-0.5) - 4.0,
        sy(top) + 4.0
    );
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="black" points="{path}"/>"#
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
