//! Design documents (`design.json`) and their resolved geometric form.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ShapeKind, CURVE_SEGMENTS};
use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon, Pose};
use crate::scalar::Scalar;

/// Jewelry silhouette. Curved kinds are centered on the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ContainerSpec {
    Circle { diameter_mm: f64 },
    Ellipse { width_mm: f64, height_mm: f64 },
    /// Round end of diameter `width_mm`, tip pointing +y, total length `length_mm`.
    Teardrop { width_mm: f64, length_mm: f64 },
    /// Regular hexagon with circumscribed diameter `diameter_mm`.
    Hexagon { diameter_mm: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl ContainerSpec {
    pub fn polygon<S: Scalar>(&self) -> Result<Polygon<S>> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(S::lit(v))
            } else {
                Err(Error::validation(name, format!("must be a positive length, got {v}")))
            }
        };
        let o = Point::origin();
        match self {
            ContainerSpec::Circle { diameter_mm } => {
                let d = positive("diameter_mm", *diameter_mm)?;
                Polygon::regular(CURVE_SEGMENTS, o, d / S::two(), S::zero())
            }
            ContainerSpec::Ellipse { width_mm, height_mm } => {
                let w = positive("width_mm", *width_mm)?;
                let h = positive("height_mm", *height_mm)?;
                Polygon::ellipse(CURVE_SEGMENTS, o, w / S::two(), h / S::two(), S::zero())
            }
            ContainerSpec::Teardrop { width_mm, length_mm } => {
                let w = positive("width_mm", *width_mm)?;
                let l = positive("length_mm", *length_mm)?;
                let r = w / S::two();
                if l <= w {
                    return Err(Error::validation("length_mm", "teardrop must be longer than it is wide"));
                }
                let mut pts: Vec<Point<S>> = (0..CURVE_SEGMENTS)
                    .map(|i| {
                        let t = S::TAU() * S::from_count(i) / S::from_count(CURVE_SEGMENTS);
                        Point::new(r * t.cos(), r * t.sin())
                    })
                    .collect();
                pts.push(Point::new(S::zero(), l - r));
                // center the bounding box vertically
                let shift = (l - r - r) / S::two();
                let hull = Polygon::convex_hull(pts)?;
                Ok(hull.translate(Point::new(S::zero(), -shift)))
            }
            ContainerSpec::Hexagon { diameter_mm } => {
                let d = positive("diameter_mm", *diameter_mm)?;
                Polygon::regular(6, o, d / S::two(), S::zero())
            }
            ContainerSpec::Polygon { vertices } => Polygon::from_pairs(vertices),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub kind_id: u32,
    pub shape_id: usize,
    pub size_index: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Placement {
    pub fn pose<S: Scalar>(&self) -> Pose<S> {
        Pose::new(S::lit(self.x), S::lit(self.y), S::lit(self.theta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub design_id: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub params_fingerprint: String,
    pub container: ContainerSpec,
    pub placements: Vec<Placement>,
}

impl Design {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("design serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("design", e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
    }

    /// Writes `<dir>/<design_id>.json` and returns the path.
    pub fn save_in(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let path = dir.as_ref().join(format!("{}.json", self.design_id));
        std::fs::write(&path, self.to_json()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Resolves catalog indices into concrete outlines.
    pub fn layout<S: Scalar>(&self, catalog: &Catalog<S>) -> Result<Layout<S>> {
        let container = self.container.polygon()?;
        let stones = self
            .placements
            .iter()
            .map(|p| {
                let shape = catalog.shape(p.shape_id)?;
                let pose = p.pose();
                Ok(Stone {
                    shape_id: p.shape_id,
                    shape: shape.kind,
                    kind_id: p.kind_id,
                    size_mm: catalog.size_mm(p.size_index)?,
                    theta: pose.theta,
                    polygon: catalog.stone_polygon(p.shape_id, p.size_index, &pose)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Layout { container, stones })
    }
}

/// All `*.json` designs in a directory, sorted by `design_id`.
pub fn load_design_dir(dir: impl AsRef<Path>) -> Result<Vec<Design>> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    let mut designs = paths.iter().map(Design::load).collect::<Result<Vec<_>>>()?;
    designs.sort_by(|a, b| a.design_id.cmp(&b.design_id));
    Ok(designs)
}

/// One stone with its concrete outline.
#[derive(Debug, Clone, PartialEq)]
pub struct Stone<S> {
    pub shape_id: usize,
    pub shape: ShapeKind,
    pub kind_id: u32,
    pub size_mm: S,
    pub theta: S,
    pub polygon: Polygon<S>,
}

impl<S: Scalar> Stone<S> {
    pub fn area(&self) -> S {
        self.polygon.area()
    }

    pub fn centroid(&self) -> Point<S> {
        self.polygon.centroid()
    }
}

/// A design with every stone materialized as a polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout<S> {
    pub container: Polygon<S>,
    pub stones: Vec<Stone<S>>,
}

impl<S: Scalar> Layout<S> {
    /// Applies the same rigid motion and uniform scale to container and stones.
    pub fn transformed(&self, pose: &Pose<S>, scale: S) -> Layout<S> {
        Layout {
            container: self.container.transform(pose, scale),
            stones: self
                .stones
                .iter()
                .map(|s| Stone {
                    polygon: s.polygon.transform(pose, scale),
                    theta: crate::geometry::normalize_angle(s.theta + pose.theta),
                    size_mm: s.size_mm * scale,
                    ..s.clone()
                })
                .collect(),
        }
    }
}
