//! Generative stone-jewelry design.
//!
//! Stones from a [`Catalog`] are packed into a container outline by a
//! rasterized greedy [`generator`], scored on six aesthetic [`features`],
//! pruned with a gradient-boosted tree model ([`gbt`], [`pruning`]) and
//! drawn as SVG ([`renderer`]).

pub mod catalog;
pub mod design;
pub mod error;
pub mod features;
pub mod gbt;
pub mod generator;
pub mod geometry;
pub mod labels;
pub mod metrics;
pub mod pruning;
pub mod renderer;
pub mod scalar;

pub use catalog::{ShapeKind, StoneKind};
pub use design::{ContainerSpec, Design, Placement};
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point = geometry::Point<f64>;
pub type Pose = geometry::Pose<f64>;
pub type Polygon = geometry::Polygon<f64>;
pub type Catalog = catalog::Catalog<f64>;
pub type Layout = design::Layout<f64>;
pub type Stone = design::Stone<f64>;
pub type FeatureVector = features::FeatureVector<f64>;
pub type FeatureParams = features::FeatureParams<f64>;

pub type Polygon32 = geometry::Polygon<f32>;
pub type Catalog32 = catalog::Catalog<f32>;
pub type Layout32 = design::Layout<f32>;
pub type FeatureVector32 = features::FeatureVector<f32>;
