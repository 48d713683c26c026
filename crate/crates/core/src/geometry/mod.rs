//! Polygon and occupancy-grid primitives.
//!
//! Everything here works in millimeters and radians. Polygons are simple,
//! counter-clockwise and have at least three vertices; constructors enforce
//! that, so the measuring functions below are infallible.

mod grid;

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use grid::{free_components, label_free_cells, rasterize, BitGrid, Component, GridSpec, Labels};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<S> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Point<S> {
    pub fn new(x: S, y: S) -> Self {
        Point { x, y }
    }

    pub fn origin() -> Self {
        Point { x: S::zero(), y: S::zero() }
    }

    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Self) -> S {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> S {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Self) -> S {
        (self - o).norm()
    }

    pub fn rotate(self, theta: S) -> Self {
        let (s, c) = theta.sin_cos();
        Point { x: self.x * c - self.y * s, y: self.x * s + self.y * c }
    }

    pub fn cast<T: Scalar>(self) -> Point<T> {
        Point { x: T::lit(self.x.to_f64_lossy()), y: T::lit(self.y.to_f64_lossy()) }
    }
}

impl<S: Scalar> Add for Point<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Point { x: self.x + o.x, y: self.y + o.y }
    }
}

impl<S: Scalar> Sub for Point<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Point { x: self.x - o.x, y: self.y - o.y }
    }
}

impl<S: Scalar> Mul<S> for Point<S> {
    type Output = Self;
    fn mul(self, k: S) -> Self {
        Point { x: self.x * k, y: self.y * k }
    }
}

impl<S: Scalar> Neg for Point<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Point { x: -self.x, y: -self.y }
    }
}

/// Position and orientation of a stone. `theta` is kept in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<S> {
    pub x: S,
    pub y: S,
    pub theta: S,
}

impl<S: Scalar> Pose<S> {
    pub fn new(x: S, y: S, theta: S) -> Self {
        Pose { x, y, theta: normalize_angle(theta) }
    }

    pub fn identity() -> Self {
        Pose { x: S::zero(), y: S::zero(), theta: S::zero() }
    }

    pub fn position(&self) -> Point<S> {
        Point::new(self.x, self.y)
    }

    /// Applies this pose to a point expressed in the shape's local frame.
    pub fn apply(&self, p: Point<S>) -> Point<S> {
        p.rotate(self.theta) + self.position()
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle<S: Scalar>(theta: S) -> S {
    let tau = S::TAU();
    let mut t = theta % tau;
    if t < S::zero() {
        t = t + tau;
    }
    if t >= tau {
        t = S::zero();
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<S> {
    pub min: Point<S>,
    pub max: Point<S>,
}

impl<S: Scalar> BBox<S> {
    pub fn width(&self) -> S {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> S {
        self.max.y - self.min.y
    }

    pub fn intersects(&self, o: &Self, pad: S) -> bool {
        self.min.x <= o.max.x + pad
            && o.min.x <= self.max.x + pad
            && self.min.y <= o.max.y + pad
            && o.min.y <= self.max.y + pad
    }

    /// Lower bound on the distance between anything inside `self` and `o`.
    pub fn gap_lower_bound(&self, o: &Self) -> S {
        let dx = (o.min.x - self.max.x).max(self.min.x - o.max.x).max(S::zero());
        let dy = (o.min.y - self.max.y).max(self.min.y - o.max.y).max(S::zero());
        dx.hypot(dy)
    }
}

/// A simple, counter-clockwise polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon<S> {
    vertices: Vec<Point<S>>,
}

impl<S: Scalar> Polygon<S> {
    /// Validates and builds a polygon. Vertices must be CCW, non-degenerate
    /// and free of self-intersections.
    pub fn new(vertices: Vec<Point<S>>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidGeometry(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite vertex".into()));
        }
        let n = vertices.len();
        for i in 0..n {
            if vertices[i].dist(vertices[(i + 1) % n]) <= S::geom_eps() {
                return Err(Error::InvalidGeometry(format!("repeated vertex at index {i}")));
            }
        }
        let sa = signed_area(&vertices);
        let scale = bbox_of(&vertices);
        let tol = S::geom_eps() * (scale.width() + scale.height()).max(S::one());
        if sa.abs() <= tol {
            return Err(Error::InvalidGeometry("degenerate (zero-area) polygon".into()));
        }
        if sa < S::zero() {
            return Err(Error::InvalidGeometry("polygon is clockwise; expected CCW".into()));
        }
        if let Some((i, j)) = first_self_intersection(&vertices) {
            return Err(Error::InvalidGeometry(format!("edges {i} and {j} intersect")));
        }
        Ok(Polygon { vertices })
    }

    /// Like [`Polygon::new`] but accepts either winding, reversing CW input.
    pub fn from_loop(mut vertices: Vec<Point<S>>) -> Result<Self> {
        if vertices.len() >= 3 && signed_area(&vertices) < S::zero() {
            vertices.reverse();
        }
        Self::new(vertices)
    }

    pub(crate) fn from_vertices_unchecked(vertices: Vec<Point<S>>) -> Self {
        debug_assert!(vertices.len() >= 3);
        Polygon { vertices }
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> Result<Self> {
        Self::new(pairs.iter().map(|p| Point::new(S::lit(p[0]), S::lit(p[1]))).collect())
    }

    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.vertices.iter().map(|v| [v.x.to_f64_lossy(), v.y.to_f64_lossy()]).collect()
    }

    /// Regular `n`-gon with one vertex at angle `phase`.
    pub fn regular(n: usize, center: Point<S>, radius: S, phase: S) -> Result<Self> {
        Self::ellipse(n, center, radius, radius, phase)
    }

    /// Axis-aligned ellipse sampled at `n` evenly spaced parameter values.
    pub fn ellipse(n: usize, center: Point<S>, a: S, b: S, phase: S) -> Result<Self> {
        let step = S::TAU() / S::from_count(n);
        let verts = (0..n)
            .map(|i| {
                let t = phase + step * S::from_count(i);
                Point::new(center.x + a * t.cos(), center.y + b * t.sin())
            })
            .collect();
        Self::new(verts)
    }

    /// Convex hull (monotone chain). Collinear points are dropped.
    pub fn convex_hull(mut pts: Vec<Point<S>>) -> Result<Self> {
        pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
        pts.dedup_by(|a, b| a.dist(*b) <= S::geom_eps());
        if pts.len() < 3 {
            return Err(Error::InvalidGeometry("hull of fewer than 3 distinct points".into()));
        }
        let turn = |o: Point<S>, a: Point<S>, b: Point<S>| (a - o).cross(b - o);
        let mut lower: Vec<Point<S>> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= S::zero() {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<Point<S>> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= S::zero() {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Self::new(lower)
    }

    pub fn vertices(&self) -> &[Point<S>] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point<S>, Point<S>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> S {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> S {
        self.edges().map(|(a, b)| a.dist(b)).sum()
    }

    pub fn centroid(&self) -> Point<S> {
        let n = self.vertices.len();
        // Shift to the first vertex to keep the cross products well conditioned.
        let o = self.vertices[0];
        let (mut cx, mut cy, mut a2) = (S::zero(), S::zero(), S::zero());
        for i in 0..n {
            let p = self.vertices[i] - o;
            let q = self.vertices[(i + 1) % n] - o;
            let c = p.cross(q);
            a2 = a2 + c;
            cx = cx + (p.x + q.x) * c;
            cy = cy + (p.y + q.y) * c;
        }
        let k = S::lit(3.0) * a2;
        Point::new(o.x + cx / k, o.y + cy / k)
    }

    pub fn bbox(&self) -> BBox<S> {
        bbox_of(&self.vertices)
    }

    /// Largest distance between any two vertices.
    pub fn max_diameter(&self) -> S {
        let mut best = S::zero();
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max(a.dist(*b));
            }
        }
        best
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        let tol = -S::geom_eps();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            (b - a).cross(c - b) >= tol
        })
    }

    /// Ray-casting point test; points within tolerance of the boundary count as inside.
    pub fn contains_point(&self, p: Point<S>) -> bool {
        if self.boundary_distance(p) <= S::geom_eps() {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn boundary_distance(&self, p: Point<S>) -> S {
        self.edges().map(|(a, b)| point_segment_distance(p, a, b)).fold(S::infinity(), S::min)
    }

    /// Scales about the local origin, rotates by `pose.theta`, then translates.
    pub fn transform(&self, pose: &Pose<S>, scale: S) -> Polygon<S> {
        Polygon { vertices: self.vertices.iter().map(|&v| pose.apply(v * scale)).collect() }
    }

    pub fn translate(&self, d: Point<S>) -> Polygon<S> {
        Polygon { vertices: self.vertices.iter().map(|&v| v + d).collect() }
    }

    pub fn cast<T: Scalar>(&self) -> Polygon<T> {
        Polygon { vertices: self.vertices.iter().map(|v| v.cast()).collect() }
    }
}

impl<S: Scalar> Serialize for Polygon<S> {
    fn serialize<Z: Serializer>(&self, s: Z) -> std::result::Result<Z::Ok, Z::Error> {
        self.to_pairs().serialize(s)
    }
}

impl<'de, S: Scalar> Deserialize<'de> for Polygon<S> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Polygon::from_pairs(&pairs).map_err(serde::de::Error::custom)
    }
}

fn signed_area<S: Scalar>(v: &[Point<S>]) -> S {
    let n = v.len();
    if n < 3 {
        return S::zero();
    }
    let o = v[0];
    let mut acc = S::zero();
    for i in 1..n - 1 {
        acc = acc + (v[i] - o).cross(v[i + 1] - o);
    }
    acc / S::two()
}

fn bbox_of<S: Scalar>(v: &[Point<S>]) -> BBox<S> {
    let mut min = Point::new(S::infinity(), S::infinity());
    let mut max = Point::new(S::neg_infinity(), S::neg_infinity());
    for p in v {
        min.x = min.x.min(p.x);
        min.y = min.y.min(p.y);
        max.x = max.x.max(p.x);
        max.y = max.y.max(p.y);
    }
    BBox { min, max }
}

fn first_self_intersection<S: Scalar>(v: &[Point<S>]) -> Option<(usize, usize)> {
    let n = v.len();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        for j in i + 1..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (v[j], v[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

fn orient<S: Scalar>(a: Point<S>, b: Point<S>, c: Point<S>) -> S {
    (b - a).cross(c - a)
}

fn on_segment<S: Scalar>(p: Point<S>, a: Point<S>, b: Point<S>) -> bool {
    point_segment_distance(p, a, b) <= S::geom_eps()
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect<S: Scalar>(a: Point<S>, b: Point<S>, c: Point<S>, d: Point<S>) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    let z = S::zero();
    if ((d1 > z && d2 < z) || (d1 < z && d2 > z)) && ((d3 > z && d4 < z) || (d3 < z && d4 > z)) {
        return true;
    }
    on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b)
}

/// True when the segments cross at a point interior to both.
fn segments_cross_properly<S: Scalar>(a: Point<S>, b: Point<S>, c: Point<S>, d: Point<S>) -> bool {
    let eps = S::geom_eps();
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
}

pub fn point_segment_distance<S: Scalar>(p: Point<S>, a: Point<S>, b: Point<S>) -> S {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 <= S::zero() {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).max(S::zero()).min(S::one());
    p.dist(a + ab * t)
}

pub fn segment_distance<S: Scalar>(a: Point<S>, b: Point<S>, c: Point<S>, d: Point<S>) -> S {
    if segments_intersect(a, b, c, d) {
        return S::zero();
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Shoelace area.
pub fn area<S: Scalar>(p: &Polygon<S>) -> S {
    p.area()
}

/// Area-weighted centroid.
pub fn centroid<S: Scalar>(p: &Polygon<S>) -> Point<S> {
    p.centroid()
}

pub fn transform<S: Scalar>(p: &Polygon<S>, pose: &Pose<S>, scale: S) -> Result<Polygon<S>> {
    if !(scale > S::zero()) {
        return Err(Error::Precondition(format!("scale must be > 0, got {scale}")));
    }
    Ok(p.transform(pose, scale))
}

/// Clips `subject` against every edge of the convex, CCW `clip` polygon.
fn clip_convex<S: Scalar>(subject: &[Point<S>], clip: &[Point<S>]) -> Vec<Point<S>> {
    let mut out: Vec<Point<S>> = subject.to_vec();
    let m = clip.len();
    for k in 0..m {
        if out.is_empty() {
            break;
        }
        let a = clip[k];
        let b = clip[(k + 1) % m];
        let input = std::mem::take(&mut out);
        let side = |p: Point<S>| orient(a, b, p);
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let (sc, sp) = (side(cur), side(prev));
            let z = S::zero();
            if sc >= z {
                if sp < z {
                    out.push(prev + (cur - prev) * (sp / (sp - sc)));
                }
                out.push(cur);
            } else if sp >= z {
                out.push(prev + (cur - prev) * (sp / (sp - sc)));
            }
        }
    }
    out
}

fn convex_intersection_area<S: Scalar>(a: &[Point<S>], b: &[Point<S>]) -> S {
    let clipped = clip_convex(a, b);
    signed_area(&clipped).max(S::zero())
}

/// Area of `a ∩ b`.
///
/// Convex pairs are clipped directly; otherwise both polygons are split into
/// signed fan triangles and the pairwise triangle intersections are summed.
pub fn overlap_area<S: Scalar>(a: &Polygon<S>, b: &Polygon<S>) -> S {
    if !a.bbox().intersects(&b.bbox(), S::zero()) {
        return S::zero();
    }
    if a.is_convex() && b.is_convex() {
        return convex_intersection_area(&a.vertices, &b.vertices);
    }
    let fan = |p: &Polygon<S>| -> Vec<([Point<S>; 3], S)> {
        let v = &p.vertices;
        (1..v.len() - 1)
            .filter_map(|i| {
                let tri = [v[0], v[i], v[i + 1]];
                let s = orient(tri[0], tri[1], tri[2]);
                if s > S::zero() {
                    Some((tri, S::one()))
                } else if s < S::zero() {
                    Some(([tri[0], tri[2], tri[1]], -S::one()))
                } else {
                    None
                }
            })
            .collect()
    };
    let (ta, tb) = (fan(a), fan(b));
    let mut total = S::zero();
    for (t1, s1) in &ta {
        for (t2, s2) in &tb {
            let w = convex_intersection_area(t1, t2);
            if w > S::zero() {
                total = total + *s1 * *s2 * w;
            }
        }
    }
    total.max(S::zero())
}

/// Minimum boundary-to-boundary distance of two polygons with disjoint interiors.
pub fn min_gap<S: Scalar>(a: &Polygon<S>, b: &Polygon<S>) -> Result<S> {
    let ov = overlap_area(a, b);
    let tol = S::geom_eps() * a.area().max(b.area()).max(S::one());
    if ov > tol {
        return Err(Error::Precondition(format!("polygons overlap (area {ov})")));
    }
    Ok(boundary_gap(a, b))
}

/// Boundary distance without the overlap check (0 when the outlines cross).
pub fn boundary_gap<S: Scalar>(a: &Polygon<S>, b: &Polygon<S>) -> S {
    let mut best = S::infinity();
    for (p, q) in a.edges() {
        for (r, s) in b.edges() {
            best = best.min(segment_distance(p, q, r, s));
            if best <= S::zero() {
                return S::zero();
            }
        }
    }
    best
}

/// The boundary gap if it is at most `limit`, else `None`. Only edge pairs
/// whose boxes come within `limit` of each other are measured, so the
/// result is bit-identical to the full scan whenever it is `Some`.
pub fn gap_within<S: Scalar>(a: &Polygon<S>, b: &Polygon<S>, limit: S) -> Option<S> {
    let (ba, bb) = (a.bbox(), b.bbox());
    if ba.gap_lower_bound(&bb) > limit {
        return None;
    }
    let near = |p: &Polygon<S>, other: &BBox<S>| -> Vec<(Point<S>, Point<S>, BBox<S>)> {
        p.edges()
            .map(|(u, v)| (u, v, BBox { min: Point::new(u.x.min(v.x), u.y.min(v.y)), max: Point::new(u.x.max(v.x), u.y.max(v.y)) }))
            .filter(|(_, _, e)| e.intersects(other, limit))
            .collect()
    };
    let ea = near(a, &bb);
    let eb = near(b, &ba);
    let mut best = S::infinity();
    for &(p, q, ref box_a) in &ea {
        for &(r, s, ref box_b) in &eb {
            if !box_a.intersects(box_b, limit) {
                continue;
            }
            best = best.min(segment_distance(p, q, r, s));
            if best <= S::zero() {
                return Some(S::zero());
            }
        }
    }
    (best <= limit).then_some(best)
}

/// True iff `p` lies inside `container` with at least `margin` clearance from its boundary.
pub fn contains<S: Scalar>(container: &Polygon<S>, p: &Polygon<S>, margin: S) -> bool {
    let margin = margin.max(S::zero());
    if !p.vertices.iter().all(|&v| container.contains_point(v)) {
        return false;
    }
    for (a, b) in p.edges() {
        let mid = (a + b) * S::lit(0.5);
        if !container.contains_point(mid) {
            return false;
        }
        for (c, d) in container.edges() {
            if segments_cross_properly(a, b, c, d) {
                return false;
            }
        }
    }
    if container.vertices.iter().any(|&v| p.contains_point(v) && p.boundary_distance(v) > S::geom_eps()) {
        return false;
    }
    if margin > S::zero() {
        return boundary_gap(container, p) >= margin - S::geom_eps();
    }
    true
}
