//! SVG figures: a heatmap of the estimated surface with the three nested
//! region boundaries drawn as interpolated contour polylines (point estimate
//! in purple, inner region in red, outer region in green).

use crate::error::{CliError, Result};
use cope_core::contour::contour_polylines;
use cope_core::cope::CopeResult;
use cope_core::grid::ScalarField;
use std::fmt::Write as _;
use std::path::Path;

const VIRIDIS: [(f64, [u8; 3]); 9] = [
    (0.000, [68, 1, 84]),
    (0.125, [72, 40, 120]),
    (0.250, [62, 74, 137]),
    (0.375, [49, 104, 142]),
    (0.500, [38, 130, 142]),
    (0.625, [31, 158, 137]),
    (0.750, [53, 183, 121]),
    (0.875, [109, 205, 89]),
    (1.000, [253, 231, 37]),
];

fn viridis(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let mut lo = VIRIDIS[0];
    for &hi in &VIRIDIS[1..] {
        if t <= hi.0 {
            let w = if hi.0 > lo.0 { (t - lo.0) / (hi.0 - lo.0) } else { 0.0 };
            let mix = |a: u8, b: u8| (a as f64 + w * (b as f64 - a as f64)).round() as u8;
            return [
                mix(lo.1[0], hi.1[0]),
                mix(lo.1[1], hi.1[1]),
                mix(lo.1[2], hi.1[2]),
            ];
        }
        lo = hi;
    }
    VIRIDIS[8].1
}

/// Maps physical coordinates into the SVG viewport (y axis flipped).
struct Frame {
    x0: f64,
    y1: f64,
    scale: f64,
    margin: f64,
}

impl Frame {
    fn to_svg(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.margin + (x - self.x0) * self.scale,
            self.margin + (self.y1 - y) * self.scale,
        )
    }
}

fn axis_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= target as f64)
        .unwrap_or(mag * 10.0);
    let first = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = first;
    while t <= hi + 1e-9 * span {
        ticks.push(t);
        t += step;
    }
    ticks
}

/// Renders the result figure: heatmap of `background` (the estimated
/// coefficient surface), purple contour of `background` at the target level,
/// red and green contours of the standardized deviation at +a and -a.
pub fn render_cope_figure(
    result: &CopeResult,
    background: &ScalarField,
    deviation: &ScalarField,
    path: &Path,
) -> Result<()> {
    background
        .geometry()
        .check_same(deviation.geometry(), "render")?;
    let a = result.threshold.a;
    let overlays = [
        (contour_polylines(background, result.level)?, "purple"),
        (contour_polylines(deviation, a)?, "red"),
        (contour_polylines(deviation, -a)?, "green"),
    ];
    let title = format!(
        "level {:.4}, alpha {:.3}, a {:.4}, M {}",
        result.level,
        result.threshold.alpha,
        a,
        result.sup_sample.m()
    );
    let svg = render_svg(background, &overlays, &title);
    std::fs::write(path, svg).map_err(|e| CliError::io(path.display().to_string(), e))
}

/// Heatmap plus labelled contour overlays; shared by the analysis and
/// simulation figures.
pub fn render_svg(
    background: &ScalarField,
    overlays: &[(Vec<Vec<(f64, f64)>>, &str)],
    title: &str,
) -> String {
    let geom = background.geometry();
    let (nx, ny) = (geom.nx(), geom.ny());
    let (sx, sy) = geom.spacing();
    let (ox, oy) = geom.origin();
    // physical extent including half-cell borders
    let x0 = ox - sx / 2.0;
    let x1 = ox + (nx as f64 - 0.5) * sx;
    let y0 = oy - sy / 2.0;
    let y1 = oy + (ny as f64 - 0.5) * sy;
    let plot_w = 560.0;
    let margin = 46.0;
    let scale = plot_w / (x1 - x0);
    let plot_h = (y1 - y0) * scale;
    let frame = Frame { x0, y1, scale, margin };
    let width = plot_w + 2.0 * margin;
    let height = plot_h + 2.0 * margin;

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &v) in background.values().iter().enumerate() {
        if background.is_active(i) && v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || hi <= lo {
        lo = 0.0;
        hi = 1.0;
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.1} {height:.1}\">"
    );
    let _ = writeln!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{width:.1}\" height=\"{height:.1}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
        width / 2.0,
        margin - 14.0,
        title
    );

    // heatmap cells
    let (cw, ch) = (sx * scale, sy * scale);
    for iy in 0..ny {
        for ix in 0..nx {
            let i = iy * nx + ix;
            if !background.is_active(i) {
                continue;
            }
            let v = background.values()[i];
            let t = if v.is_finite() { (v - lo) / (hi - lo) } else { 0.0 };
            let [r, g, b] = viridis(t);
            let (cx, cy) = geom.center(ix, iy);
            let (px, py) = frame.to_svg(cx - sx / 2.0, cy + sy / 2.0);
            let _ = writeln!(
                svg,
                "<rect x=\"{px:.2}\" y=\"{py:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#{r:02x}{g:02x}{b:02x}\"/>",
                cw + 0.05,
                ch + 0.05
            );
        }
    }

    for (paths, color) in overlays {
        for poly in paths {
            if poly.len() < 2 {
                continue;
            }
            let mut points = String::new();
            for &(x, y) in poly {
                let (px, py) = frame.to_svg(x, y);
                let _ = write!(points, "{px:.2},{py:.2} ");
            }
            let _ = writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>",
                points.trim_end()
            );
        }
    }

    // frame and axis ticks in physical coordinates
    let (fx0, fy1) = frame.to_svg(x0, y0);
    let (fx1, fy0) = frame.to_svg(x1, y1);
    let _ = writeln!(
        svg,
        "<rect x=\"{fx0:.1}\" y=\"{fy0:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>",
        fx1 - fx0,
        fy1 - fy0
    );
    for t in axis_ticks(x0, x1, 6) {
        let (px, py) = frame.to_svg(t, y0);
        let _ = writeln!(
            svg,
            "<line x1=\"{px:.1}\" y1=\"{py:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
            py + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{px:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{t}</text>",
            py + 18.0
        );
    }
    for t in axis_ticks(y0, y1, 6) {
        let (px, py) = frame.to_svg(x0, t);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{px:.1}\" y2=\"{py:.1}\" stroke=\"black\"/>",
            px - 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{t}</text>",
            px - 8.0,
            py + 4.0
        );
    }
    // color scale annotation
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">[{lo:.3}, {hi:.3}]</text>",
        margin,
        height - 10.0
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use cope_core::grid::GridGeometry;

    #[test]
    fn viridis_endpoints() {
        assert_eq!(viridis(0.0), [68, 1, 84]);
        assert_eq!(viridis(1.0), [253, 231, 37]);
        assert_eq!(viridis(-5.0), viridis(0.0));
    }

    #[test]
    fn svg_contains_heatmap_and_overlays() {
        let g = GridGeometry::unit(8, 6).unwrap();
        let f = ScalarField::from_fn(g, |x, _| x);
        let paths = contour_polylines(&f, 3.5).unwrap();
        assert!(!paths.is_empty());
        let svg = render_svg(&f, &[(paths, "purple")], "demo");
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<rect").count(), 8 * 6 + 2); // cells + bg + frame
        assert!(svg.contains("stroke=\"purple\""));
        assert!(svg.contains("demo"));
    }

    #[test]
    fn empty_overlays_draw_no_polylines() {
        let g = GridGeometry::unit(4, 4).unwrap();
        let f = ScalarField::constant(g, 1.0);
        let svg = render_svg(&f, &[(vec![], "red"), (vec![], "green")], "flat");
        assert!(!svg.contains("<polyline"));
    }

    #[test]
    fn tick_helper_spans_the_range() {
        let ticks = axis_ticks(0.0, 10.0, 6);
        assert!(ticks.len() >= 4 && ticks.len() <= 7);
        assert!(ticks.first().unwrap() >= &0.0);
        assert!(ticks.last().unwrap() <= &10.0);
    }
}
