//! Plain-text artifacts: CSV tables and static SVG renderings of deformed grids.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::algebra2d::Vec2;
use crate::shear_grid::ShearGridField;

/// Header row plus rows of preformatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|v| v.to_string()).collect());
    }

    pub fn push_cells(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgStyle {
    /// Side of the square canvas in pixels.
    pub size: f64,
    pub stroke_width: f64,
    pub stroke: &'static str,
    /// Grid lines per family.
    pub lines: usize,
    /// Points per polyline.
    pub samples: usize,
}

impl Default for SvgStyle {
    fn default() -> Self {
        Self { size: 480.0, stroke_width: 0.8, stroke: "#1f3a93", lines: 16, samples: 200 }
    }
}

/// Renders polylines in a square whose world extent is `[−half, half]²`.
pub fn svg_polylines(lines: &[Vec<Vec2>], half: f64, style: &SvgStyle) -> String {
    let s = style.size;
    let map = |p: Vec2| (0.5 * s * (1.0 + p.x / half), 0.5 * s * (1.0 - p.y / half));
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}">"#);
    let _ = writeln!(out, r#"<rect width="{s}" height="{s}" fill="white"/>"#);
    let _ = writeln!(out, r#"<g fill="none" stroke="{}" stroke-width="{}">"#, style.stroke, style.stroke_width);
    for line in lines {
        let pts: Vec<String> = line
            .iter()
            .map(|&p| {
                let (x, y) = map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(out, r#"<polyline points="{}"/>"#, pts.join(" "));
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// Image of the polar grid of `a ≤ r ≤ b` under `u(r, θ)`: circles and rays.
pub fn annulus_svg(u: impl Fn(f64, f64) -> Vec2, a: f64, b: f64, style: &SvgStyle) -> String {
    let m = style.samples;
    let mut lines = Vec::new();
    for c in 0..=style.lines / 2 {
        let r = a + (b - a) * c as f64 / (style.lines / 2).max(1) as f64;
        lines.push((0..=m).map(|t| u(r, 2.0 * PI * t as f64 / m as f64)).collect());
    }
    for q in 0..style.lines {
        let th = 2.0 * PI * q as f64 / style.lines as f64;
        lines.push((0..=m).map(|t| u(a + (b - a) * t as f64 / m as f64, th)).collect());
    }
    svg_polylines(&lines, 1.1 * b, style)
}

/// Image of the grid lines of `Q` under `u_σ(x) = x + σ(x)e₂`.
pub fn square_svg(sigma: &ShearGridField, style: &SvgStyle) -> String {
    let g = sigma.grid;
    let stride = (g.last() / style.lines.max(1)).max(1);
    let mut lines = Vec::new();
    let mut idx: Vec<usize> = (0..=g.last()).step_by(stride).collect();
    if *idx.last().unwrap() != g.last() {
        idx.push(g.last());
    }
    for &i in &idx {
        lines.push(
            (0..g.side())
                .map(|j| {
                    let (x, y) = sigma.deformed(i, j);
                    Vec2::new(x, y)
                })
                .collect(),
        );
    }
    for &j in &idx {
        lines.push(
            (0..g.side())
                .map(|i| {
                    let (x, y) = sigma.deformed(i, j);
                    Vec2::new(x, y)
                })
                .collect(),
        );
    }
    let extent = sigma.values.iter().enumerate().map(|(k, v)| (g.coord(k / g.side()) + v).abs()).fold(1.0, f64::max);
    svg_polylines(&lines, 1.1 * extent, style)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shear_grid::ShearGrid;

    #[test]
    fn csv_layout() {
        let mut t = CsvTable::new(&["x", "y"]);
        t.push(&[1.0, 0.25]);
        t.push_cells(vec!["2".into(), "M".into()]);
        assert_eq!(t.render(), "x,y\n1,0.25\n2,M\n");
    }

    #[test]
    fn identity_annulus_is_polar_grid() {
        let style = SvgStyle { lines: 4, samples: 8, ..SvgStyle::default() };
        let svg = annulus_svg(|r, t| r * Vec2::e_r(t), 1.0, 2.0, &style);
        assert_eq!(svg.matches("<polyline").count(), 3 + 4);
        assert_eq!(svg, annulus_svg(|r, t| r * Vec2::e_r(t), 1.0, 2.0, &style));
        // the inner circle passes through (a, 0) mapped to canvas coordinates
        let x = 0.5 * 480.0 * (1.0 + 1.0 / 2.2);
        assert!(svg.contains(&format!("{x:.3},240.000")));
        assert!(!svg.contains("<script"));
    }

    #[test]
    fn square_pinched_strip() {
        let g = ShearGrid::new(8).unwrap();
        let s = ShearGridField::from_fn(g, |x1, x2| if x1 >= 0.5 { -x2 } else { 0.0 });
        let svg = square_svg(&s, &SvgStyle::default());
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
