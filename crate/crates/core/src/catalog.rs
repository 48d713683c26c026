//! Stone catalog: kinds (colors), the seven built-in cuts and the size ladder.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon, Pose};
use crate::scalar::Scalar;

pub const SHAPE_COUNT: usize = 7;
pub const DEFAULT_SIZE_COUNT: usize = 20;
pub const DEFAULT_KIND_COUNT: usize = 105;

/// Vertices used for any full ellipse or circle outline.
pub const CURVE_SEGMENTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum ShapeKind {
    Round = 0,
    Oval = 1,
    Square = 2,
    Rectangle = 3,
    Pear = 4,
    Marquise = 5,
    Triangle = 6,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; SHAPE_COUNT] = [
        ShapeKind::Round,
        ShapeKind::Oval,
        ShapeKind::Square,
        ShapeKind::Rectangle,
        ShapeKind::Pear,
        ShapeKind::Marquise,
        ShapeKind::Triangle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Round => "round",
            ShapeKind::Oval => "oval",
            ShapeKind::Square => "square",
            ShapeKind::Rectangle => "rectangle",
            ShapeKind::Pear => "pear",
            ShapeKind::Marquise => "marquise",
            ShapeKind::Triangle => "triangle",
        }
    }

    /// Number of rotations mapping the outline onto itself.
    pub fn symmetry_order(self) -> u32 {
        match self {
            ShapeKind::Round => CURVE_SEGMENTS as u32,
            ShapeKind::Oval | ShapeKind::Rectangle | ShapeKind::Marquise => 2,
            ShapeKind::Square => 4,
            ShapeKind::Pear => 1,
            ShapeKind::Triangle => 3,
        }
    }

    /// Round outlines approximate a circle and carry no meaningful orientation.
    pub fn is_isotropic(self) -> bool {
        self == ShapeKind::Round
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeDef<S> {
    pub shape_id: usize,
    pub kind: ShapeKind,
    pub name: String,
    /// Centroid at the origin, maximum vertex-to-vertex distance 1.
    pub unit_outline: Polygon<S>,
    pub symmetry_order: u32,
}

fn raw_outline<S: Scalar>(kind: ShapeKind) -> Polygon<S> {
    let l = S::lit;
    let o = Point::origin();
    let built = match kind {
        ShapeKind::Round => Polygon::regular(CURVE_SEGMENTS, o, l(0.5), S::zero()),
        ShapeKind::Oval => Polygon::ellipse(CURVE_SEGMENTS, o, l(0.5), l(0.35), S::zero()),
        ShapeKind::Square => {
            let h = l(0.5) / S::two().sqrt();
            Polygon::new(vec![Point::new(-h, -h), Point::new(h, -h), Point::new(h, h), Point::new(-h, h)])
        }
        ShapeKind::Rectangle => {
            let w = S::one() / l(5.0).sqrt();
            let hh = l(0.5) / l(5.0).sqrt();
            Polygon::new(vec![Point::new(-w, -hh), Point::new(w, -hh), Point::new(w, hh), Point::new(-w, hh)])
        }
        ShapeKind::Pear => {
            // hull of a round end and a point
            let r = l(0.3);
            let mut pts: Vec<Point<S>> = (0..CURVE_SEGMENTS)
                .map(|i| {
                    let t = S::TAU() * S::from_count(i) / S::from_count(CURVE_SEGMENTS);
                    Point::new(r * t.cos(), r * t.sin())
                })
                .collect();
            pts.push(Point::new(l(0.7), S::zero()));
            Polygon::convex_hull(pts)
        }
        ShapeKind::Marquise => {
            // lens of two circular arcs meeting at the tips (±0.5, 0)
            let h = l(0.225);
            let radius = (l(0.25) + h * h) / (S::two() * h);
            let cy = h - radius;
            let start = (-cy).atan2(l(0.5));
            let end = S::PI() - start;
            let half = CURVE_SEGMENTS / 2;
            let upper: Vec<Point<S>> = (0..=half)
                .map(|i| {
                    let t = start + (end - start) * S::from_count(i) / S::from_count(half);
                    Point::new(radius * t.cos(), cy + radius * t.sin())
                })
                .collect();
            let mut verts = upper.clone();
            verts[0] = Point::new(l(0.5), S::zero());
            verts[half] = Point::new(l(-0.5), S::zero());
            verts.extend(upper[1..half].iter().map(|&p| -p));
            Polygon::new(verts)
        }
        ShapeKind::Triangle => {
            let r = S::one() / l(3.0).sqrt();
            let verts = [90.0f64, 210.0, 330.0]
                .iter()
                .map(|d| {
                    let t = S::lit(d.to_radians());
                    Point::new(r * t.cos(), r * t.sin())
                })
                .collect();
            Polygon::new(verts)
        }
    };
    built.expect("built-in outline is valid")
}

fn normalized_outline<S: Scalar>(kind: ShapeKind) -> Polygon<S> {
    let raw = raw_outline::<S>(kind);
    let c = raw.centroid();
    let k = S::one() / raw.max_diameter();
    let verts = raw.vertices().iter().map(|&v| (v - c) * k).collect();
    Polygon::from_vertices_unchecked(verts)
}

/// The seven built-in cuts, in `shape_id` order.
pub fn builtin_shapes<S: Scalar>() -> Vec<ShapeDef<S>> {
    ShapeKind::ALL
        .iter()
        .enumerate()
        .map(|(i, &kind)| ShapeDef {
            shape_id: i,
            kind,
            name: kind.name().to_string(),
            unit_outline: normalized_outline(kind),
            symmetry_order: kind.symmetry_order(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoneKind {
    pub kind_id: u32,
    pub name: String,
    pub color: [u8; 3],
    #[serde(default)]
    pub texture: Option<String>,
}

/// Size ladder used when a catalog file omits `sizes_mm`: `2.0 · 1.12^i`.
pub fn default_sizes_mm() -> Vec<f64> {
    // repeated multiplication: `powi` rounds differently across optimization levels
    std::iter::successors(Some(2.0f64), |s| Some(s * 1.12)).take(DEFAULT_SIZE_COUNT).collect()
}

const GEM_HUES: [(&str, [u8; 3]); 15] = [
    ("amethyst", [153, 102, 204]),
    ("garnet", [115, 54, 53]),
    ("ruby", [224, 17, 95]),
    ("sapphire", [15, 82, 186]),
    ("emerald", [80, 200, 120]),
    ("topaz", [255, 200, 124]),
    ("citrine", [228, 208, 10]),
    ("peridot", [180, 196, 36]),
    ("aquamarine", [127, 255, 212]),
    ("tourmaline", [134, 161, 125]),
    ("opal", [168, 195, 188]),
    ("onyx", [53, 56, 57]),
    ("turquoise", [64, 224, 208]),
    ("moonstone", [220, 226, 234]),
    ("lapis", [38, 97, 156]),
];

fn tone(base: [u8; 3], variant: usize) -> [u8; 3] {
    // variant 1 is the base hue, 2-4 lighten, 5-7 darken
    let mix = |c: u8, target: f64, t: f64| (c as f64 + (target - c as f64) * t).round().clamp(0.0, 255.0) as u8;
    let (target, t) = match variant {
        1 => return base,
        2..=4 => (255.0, 0.15 * (variant - 1) as f64),
        _ => (0.0, 0.15 * (variant - 4) as f64),
    };
    [mix(base[0], target, t), mix(base[1], target, t), mix(base[2], target, t)]
}

/// 15 gem hues × 7 tonal variants.
pub fn default_kinds() -> Vec<StoneKind> {
    let mut out = Vec::with_capacity(DEFAULT_KIND_COUNT);
    for (name, base) in GEM_HUES {
        for v in 1..=7 {
            out.push(StoneKind {
                kind_id: out.len() as u32,
                name: format!("{name}-{v}"),
                color: tone(base, v),
                texture: None,
            });
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogFile {
    kinds: Vec<StoneKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sizes_mm: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog<S> {
    pub kinds: Vec<StoneKind>,
    pub shapes: Vec<ShapeDef<S>>,
    /// Max diameter in mm per size index, strictly increasing.
    pub sizes: Vec<S>,
}

impl<S: Scalar> Catalog<S> {
    pub fn builtin() -> Self {
        Catalog {
            kinds: default_kinds(),
            shapes: builtin_shapes(),
            sizes: default_sizes_mm().into_iter().map(S::lit).collect(),
        }
    }

    pub fn new(kinds: Vec<StoneKind>, sizes_mm: Vec<f64>) -> Result<Self> {
        validate_kinds(&kinds)?;
        validate_sizes(&sizes_mm)?;
        Ok(Catalog { kinds, shapes: builtin_shapes(), sizes: sizes_mm.into_iter().map(S::lit).collect() })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CatalogFile = serde_json::from_str(text).map_err(|e| Error::parse("catalog", e))?;
        Self::new(file.kinds, file.sizes_mm.unwrap_or_else(default_sizes_mm))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        let file = CatalogFile {
            kinds: self.kinds.clone(),
            sizes_mm: Some(self.sizes.iter().map(|s| s.to_f64_lossy()).collect()),
        };
        serde_json::to_string_pretty(&file).expect("catalog serializes")
    }

    pub fn shape(&self, shape_id: usize) -> Result<&ShapeDef<S>> {
        self.shapes.get(shape_id).ok_or(Error::IndexOutOfRange { what: "shape", index: shape_id, len: self.shapes.len() })
    }

    pub fn size_mm(&self, size_index: usize) -> Result<S> {
        self.sizes.get(size_index).copied().ok_or(Error::IndexOutOfRange {
            what: "size",
            index: size_index,
            len: self.sizes.len(),
        })
    }

    pub fn kind(&self, kind_id: u32) -> Option<&StoneKind> {
        self.kinds.iter().find(|k| k.kind_id == kind_id)
    }

    /// Outline of a stone scaled to its size and placed at `pose`.
    pub fn stone_polygon(&self, shape_id: usize, size_index: usize, pose: &Pose<S>) -> Result<Polygon<S>> {
        let shape = self.shape(shape_id)?;
        let size = self.size_mm(size_index)?;
        Ok(shape.unit_outline.transform(pose, size))
    }

    pub fn stone_area(&self, shape_id: usize, size_index: usize) -> Result<S> {
        let size = self.size_mm(size_index)?;
        Ok(self.shape(shape_id)?.unit_outline.area() * size * size)
    }

    /// Area of the smallest stone the catalog can produce.
    pub fn smallest_stone_area(&self) -> S {
        let s0 = self.sizes[0];
        self.shapes.iter().map(|s| s.unit_outline.area() * s0 * s0).fold(S::infinity(), S::min)
    }
}

fn validate_kinds(kinds: &[StoneKind]) -> Result<()> {
    if kinds.is_empty() {
        return Err(Error::validation("kinds", "catalog must list at least one stone kind"));
    }
    let mut seen = HashSet::new();
    for k in kinds {
        if !seen.insert(k.kind_id) {
            return Err(Error::validation("kinds.kind_id", format!("duplicate kind_id {}", k.kind_id)));
        }
    }
    Ok(())
}

fn validate_sizes(sizes: &[f64]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::validation("sizes_mm", "must not be empty"));
    }
    for (i, &s) in sizes.iter().enumerate() {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::validation("sizes_mm", format!("entry {i} = {s} is not a positive size")));
        }
        if i > 0 && s <= sizes[i - 1] {
            return Err(Error::validation("sizes_mm", format!("entry {i} = {s} does not increase strictly")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHIPPED: &str = include_str!("../data/catalog.json");

    #[test]
    fn seven_shapes_unit_normalized() {
        let shapes = builtin_shapes::<f64>();
        assert_eq!(shapes.len(), 7);
        let names: Vec<_> = shapes.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["round", "oval", "square", "rectangle", "pear", "marquise", "triangle"]);
        for s in &shapes {
            assert!((s.unit_outline.max_diameter() - 1.0).abs() < 1e-6, "{}", s.name);
            assert!(s.unit_outline.is_convex(), "{}", s.name);
            let c = s.unit_outline.centroid();
            assert!(c.norm() < 1e-12, "{} centroid {c:?}", s.name);
        }
        assert_eq!(shapes[0].symmetry_order, 64);
        assert!((shapes[2].unit_outline.area() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn symmetry_rotation_maps_outline_onto_itself() {
        for s in builtin_shapes::<f64>() {
            let step = std::f64::consts::TAU / s.symmetry_order as f64;
            let rotated = s.unit_outline.transform(&Pose::new(0.0, 0.0, step), 1.0);
            for v in rotated.vertices() {
                let d = s.unit_outline.vertices().iter().map(|w| w.dist(*v)).fold(f64::INFINITY, f64::min);
                assert!(d < 1e-6, "{} off by {d}", s.name);
            }
        }
    }

    #[test]
    fn shipped_catalog_matches_builtin() {
        let c = Catalog::<f64>::from_json(SHIPPED).unwrap();
        assert_eq!(c.kinds.len(), 105);
        assert_eq!(c.shapes.len(), 7);
        assert_eq!(c.sizes.len(), 20);
        assert_eq!(c, Catalog::builtin());
        assert_eq!(c.kinds[0].name, "amethyst-1");
        assert_eq!(c.kinds[0].color, [153, 102, 204]);
    }

    #[test]
    fn default_ladder() {
        let s = default_sizes_mm();
        assert_eq!(s.len(), 20);
        assert_eq!(s[0], 2.0);
        assert!((s[19] - 2.0 * 1.12f64.powi(19)).abs() < 1e-12);
        assert!(s.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn omitted_sizes_use_ladder() {
        let c = Catalog::<f64>::from_json(r#"{"kinds":[{"kind_id":0,"name":"x","color":[1,2,3]}]}"#).unwrap();
        assert_eq!(c.sizes, default_sizes_mm());
    }

    #[test]
    fn validation_errors_name_the_field() {
        let empty = Catalog::<f64>::from_json(r#"{"kinds":[]}"#).unwrap_err();
        assert!(matches!(empty, Error::Validation { ref field, .. } if field == "kinds"));
        let flat = Catalog::<f64>::from_json(
            r#"{"kinds":[{"kind_id":0,"name":"x","color":[1,2,3]}],"sizes_mm":[2,2,3]}"#,
        )
        .unwrap_err();
        assert!(matches!(flat, Error::Validation { ref field, .. } if field == "sizes_mm"));
        let dup = Catalog::<f64>::from_json(
            r#"{"kinds":[{"kind_id":0,"name":"x","color":[1,2,3]},{"kind_id":0,"name":"y","color":[1,2,3]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(dup, Error::Validation { ref field, .. } if field == "kinds.kind_id"));
        assert!(matches!(Catalog::<f64>::from_json("{"), Err(Error::Parse { .. })));
    }

    #[test]
    fn stone_polygon_scaling() {
        let c = Catalog::<f64>::builtin();
        let i = c.sizes.iter().position(|&s| s > 4.0).unwrap();
        let c4 = Catalog::<f64>::new(default_kinds(), vec![1.0, 4.0]).unwrap();
        let round4 = c4.stone_polygon(0, 1, &Pose::identity()).unwrap();
        assert!((round4.max_diameter() - 4.0).abs() < 1e-6);
        let unit = c.shapes[3].unit_outline.transform(&Pose::identity(), c.sizes[i]);
        assert_eq!(c.stone_polygon(3, i, &Pose::identity()).unwrap(), unit);
        for shape in 0..7 {
            let a0 = c.stone_polygon(shape, 0, &Pose::identity()).unwrap().area();
            for (k, s) in c.sizes.iter().enumerate() {
                let a = c.stone_polygon(shape, k, &Pose::new(1.0, 2.0, 0.3 * k as f64)).unwrap().area();
                let expect = a0 * (s / c.sizes[0]).powi(2);
                assert!((a - expect).abs() < 1e-9 * expect);
                assert!((a - c.stone_area(shape, k).unwrap()).abs() < 1e-9 * a);
            }
        }
        assert!(matches!(c.stone_polygon(7, 0, &Pose::identity()), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(c.stone_polygon(0, 20, &Pose::identity()), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn generic_catalog_in_f32() {
        let c = Catalog::<f32>::builtin();
        let p = c.stone_polygon(0, 5, &Pose::new(1.0, 1.0, 0.5)).unwrap();
        assert!((p.max_diameter() - c.sizes[5]).abs() < 1e-4);
    }
}
