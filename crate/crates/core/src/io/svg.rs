use std::fmt::Write;

/// One curve in metric coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SvgPath {
    pub label: String,
    pub color: String,
    pub points: Vec<Vec<f64>>,
    /// Mark the last point as a singular endpoint.
    pub singular_end: bool,
}

/// Which metric coordinates are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Plane(usize, usize),
    /// Fixed oblique view of three coordinates.
    Oblique(usize, usize, usize),
}

impl Projection {
    fn map(&self, p: &[f64]) -> (f64, f64) {
        match *self {
            Projection::Plane(i, j) => (p[i], p[j]),
            Projection::Oblique(i, j, k) => {
                let (c, s) = (0.5_f64, 0.3_f64);
                (p[i] - c * p[k], p[j] - s * p[k])
            }
        }
    }

    fn dims(&self) -> Vec<usize> {
        match *self {
            Projection::Plane(i, j) => vec![i, j],
            Projection::Oblique(i, j, k) => vec![i, j, k],
        }
    }
}

const SIZE: f64 = 400.0;
const MARGIN: f64 = 40.0;

/// Renders paths, singular endpoints and the base point as SVG.
///
/// Points lacking a projected coordinate are skipped. Output depends only on
/// the inputs.
pub fn emit_svg(paths: &[SvgPath], base: Option<&[f64]>, projection: Projection, axis_labels: [&str; 2]) -> String {
    let dims = projection.dims();
    let usable = |p: &&Vec<f64>| dims.iter().all(|&d| d < p.len());
    let mut projected: Vec<Vec<(f64, f64)>> = paths
        .iter()
        .map(|p| p.points.iter().filter(usable).map(|q| projection.map(q)).collect())
        .collect();
    let base = base.filter(|b| dims.iter().all(|&d| d < b.len())).map(|b| projection.map(b));
    let all: Vec<(f64, f64)> = projected.iter().flatten().copied().chain(base).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (0.0, 1.0, 0.0, 1.0);
    if !all.is_empty() {
        x0 = all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        x1 = all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        y0 = all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        y1 = all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    }
    if x1 - x0 <= 0.0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let span = SIZE - 2.0 * MARGIN;
    let to_px = |(x, y): (f64, f64)| {
        (
            MARGIN + (x - x0) / (x1 - x0) * span,
            SIZE - MARGIN - (y - y0) / (y1 - y0) * span,
        )
    };
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>"#).unwrap();
    let lo = MARGIN;
    let hi = SIZE - MARGIN;
    writeln!(s, r#"<g stroke="black" stroke-width="1"><line x1="{lo}" y1="{hi}" x2="{hi}" y2="{hi}"/><line x1="{lo}" y1="{hi}" x2="{lo}" y2="{lo}"/></g>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{hi}" y="{}" font-size="12" text-anchor="end">{}</text>"#,
        SIZE - 10.0,
        escape(axis_labels[0])
    )
    .unwrap();
    writeln!(s, r#"<text x="10" y="{}" font-size="12">{}</text>"#, lo - 10.0, escape(axis_labels[1])).unwrap();
    writeln!(
        s,
        r#"<text x="{lo}" y="{}" font-size="10">{x0:.4} .. {x1:.4}</text>"#,
        SIZE - 10.0
    )
    .unwrap();
    writeln!(s, r#"<text x="{}" y="{}" font-size="10">{y0:.4} .. {y1:.4}</text>"#, lo + 4.0, lo + 12.0).unwrap();
    for (path, pts) in paths.iter().zip(projected.iter_mut()) {
        if pts.is_empty() {
            continue;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = to_px(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            escape(&path.color),
            coords.join(" "),
            escape(&path.label)
        )
        .unwrap();
        if path.singular_end {
            let (x, y) = to_px(*pts.last().unwrap());
            writeln!(
                s,
                r#"<circle cx="{x:.3}" cy="{y:.3}" r="3.5" fill="{}" stroke="black"/>"#,
                escape(&path.color)
            )
            .unwrap();
        }
    }
    if let Some(b) = base {
        let (x, y) = to_px(b);
        writeln!(
            s,
            r#"<rect x="{:.3}" y="{:.3}" width="7" height="7" fill="gold" stroke="black"/>"#,
            x - 3.5,
            y - 3.5
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_plot_has_axes_only() {
        let s = emit_svg(&[], None, Projection::Plane(0, 1), ["a", "b"]);
        assert!(s.starts_with("<svg"));
        assert!(s.ends_with("</svg>\n"));
        assert!(!s.contains("<polyline"));
        assert!(s.contains("<line"));
    }

    #[test]
    fn segment_fills_the_plot_area() {
        let p = SvgPath {
            label: "seg".into(),
            color: "red".into(),
            points: vec![vec![0.0, 0.0], vec![2.0, 1.0]],
            singular_end: true,
        };
        let s = emit_svg(&[p], None, Projection::Plane(0, 1), ["x", "y"]);
        assert!(s.contains(r#"points="40.000,360.000 360.000,40.000""#), "{s}");
        assert!(s.contains(r#"<circle cx="360.000" cy="40.000""#));
    }

    #[test]
    fn labels_are_escaped() {
        let p = SvgPath {
            label: "a<b".into(),
            color: "green".into(),
            points: vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            singular_end: false,
        };
        let s = emit_svg(&[p], None, Projection::Plane(0, 1), ["&", "y"]);
        assert!(s.contains("a&lt;b"));
        assert!(s.contains("&amp;"));
    }
}
