//! SVG output: container outline, then a bezel under each stone.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::design::Design;
use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderStyle {
    /// mm
    pub bezel_width: f64,
    pub bezel_color: [u8; 3],
    pub background: Option<[u8; 3]>,
    pub px_per_mm: f64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle { bezel_width: 0.35, bezel_color: [192, 192, 192], background: None, px_per_mm: 10.0 }
    }
}

impl RenderStyle {
    pub fn validate(&self) -> Result<()> {
        if !(self.bezel_width >= 0.0 && self.bezel_width.is_finite()) {
            return Err(Error::validation("bezel_width", "must be ≥ 0"));
        }
        if !(self.px_per_mm > 0.0 && self.px_per_mm.is_finite()) {
            return Err(Error::validation("px_per_mm", "must be > 0"));
        }
        Ok(())
    }
}

/// Outward offset by `w` with mitered corners.
pub fn bezel_outline(p: &Polygon<f64>, w: f64) -> Result<Polygon<f64>> {
    if !(w >= 0.0 && w.is_finite()) {
        return Err(Error::validation("bezel_width", "must be ≥ 0"));
    }
    if w == 0.0 {
        return Ok(p.clone());
    }
    let v = p.vertices();
    let n = v.len();
    // outward unit normal of edge i (v[i] → v[i+1]); CCW winding puts the outside on the right
    let normal = |i: usize| {
        let d = v[(i + 1) % n] - v[i];
        Point::new(d.y, -d.x) * (1.0 / d.norm())
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (normal((i + n - 1) % n), normal(i));
        let c = 1.0 + a.dot(b);
        if c < 1e-9 {
            return Err(Error::RenderDegenerate(format!("vertex {i} turns back on itself")));
        }
        // miter point: offset along the bisector by w / cos(half angle)
        out.push(v[i] + (a + b) * (w / c));
    }
    let q = Polygon::new(out).map_err(|e| Error::RenderDegenerate(format!("bezel offset by {w} mm: {e}")))?;
    if q.area() <= p.area() {
        return Err(Error::RenderDegenerate(format!("bezel offset by {w} mm does not enlarge the outline")));
    }
    Ok(q)
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn path_data(p: &Polygon<f64>, px: f64) -> String {
    let mut d = String::new();
    for (i, v) in p.vertices().iter().enumerate() {
        let _ = write!(d, "{}{},{} ", if i == 0 { 'M' } else { 'L' }, v.x * px, v.y * px);
    }
    d.push('Z');
    d
}

/// Renders a design. Path coordinates are design coordinates times
/// `px_per_mm`; a group transform flips y so the image is upright.
pub fn render_svg(design: &Design, catalog: &Catalog<f64>, style: &RenderStyle) -> Result<String> {
    style.validate()?;
    let layout = design.layout(catalog)?;
    let px = style.px_per_mm;
    let bb = layout.container.bbox();
    let (w, h) = (bb.width() * px, bb.height() * px);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" version="1.1" width="{w}" height="{h}" viewBox="{} {} {w} {h}">"#,
        bb.min.x * px,
        -bb.max.y * px
    );
    let _ = writeln!(s, "  <title>{}</title>", escape(&design.design_id));

    let mut textured: Vec<u32> = layout
        .stones
        .iter()
        .filter(|st| catalog.kind(st.kind_id).is_some_and(|k| k.texture.is_some()))
        .map(|st| st.kind_id)
        .collect();
    textured.sort_unstable();
    textured.dedup();
    if !textured.is_empty() {
        s.push_str("  <defs>\n");
        for k in &textured {
            let href = escape(catalog.kind(*k).and_then(|k| k.texture.as_deref()).unwrap_or_default());
            let side = 4.0 * px;
            let _ = writeln!(
                s,
                r#"    <pattern id="tex-{k}" patternUnits="userSpaceOnUse" width="{side}" height="{side}"><image xlink:href="{href}" href="{href}" width="{side}" height="{side}"/></pattern>"#
            );
        }
        s.push_str("  </defs>\n");
    }
    if let Some(bg) = style.background {
        let _ = writeln!(s, r#"  <rect x="{}" y="{}" width="{w}" height="{h}" fill="{}"/>"#, bb.min.x * px, -bb.max.y * px, hex(bg));
    }

    let bezel = hex(style.bezel_color);
    s.push_str("  <g transform=\"scale(1,-1)\">\n");
    let _ = writeln!(
        s,
        r#"    <path class="container" d="{}" fill="none" stroke="{bezel}" stroke-width="{}"/>"#,
        path_data(&layout.container, px),
        (style.bezel_width * px).max(1.0)
    );
    for (i, st) in layout.stones.iter().enumerate() {
        match bezel_outline(&st.polygon, style.bezel_width) {
            Ok(b) if style.bezel_width > 0.0 => {
                let _ = writeln!(s, r#"    <path class="bezel" d="{}" fill="{bezel}"/>"#, path_data(&b, px));
            }
            Ok(_) => {}
            Err(e) => log::warn!("{}: stone {i} drawn without bezel: {e}", design.design_id),
        }
        let kind = catalog.kind(st.kind_id);
        let fill = match kind {
            Some(k) if k.texture.is_some() => format!("url(#tex-{})", k.kind_id),
            Some(k) => hex(k.color),
            None => return Err(Error::validation("kind_id", format!("kind {} is not in the catalog", st.kind_id))),
        };
        let _ = writeln!(
            s,
            r#"    <path class="stone" data-kind="{}" d="{}" fill="{fill}"/>"#,
            st.kind_id,
            path_data(&st.polygon, px)
        );
    }
    s.push_str("  </g>\n</svg>\n");
    Ok(s)
}
