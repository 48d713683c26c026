//! Rasterized stone footprints.
//!
//! A mask is a set of cell offsets from an anchor cell, one column run per
//! row. Two masks exist per (shape, size, orientation): the *cover* (every
//! cell whose center lies within half a cell diagonal of the stone, so the
//! stone lies inside the union of its cover cells) and the *stamp* (cells
//! within bezel margin plus half a diagonal, written into the grid when the
//! stone is placed).

use std::collections::HashMap;

use crate::catalog::{Catalog, ShapeKind};
use crate::features::canonical_orientation;
use crate::geometry::{Point, Polygon, Pose};

/// Extra reach so float noise only ever grows a mask.
const MASK_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    /// Row offset of `runs[0]`.
    pub row0: i32,
    /// Inclusive column-offset range per row; never empty.
    pub runs: Vec<(i32, i32)>,
    pub cells: usize,
    /// Every offset with squared length below this is in the mask.
    pub clear2: i64,
    /// Largest squared offset length in the mask.
    pub reach2: i64,
}

impl Mask {
    /// Cells within `reach` mm of the convex polygon `p` (anchor at the origin).
    pub fn around(p: &Polygon<f64>, reach: f64, cell: f64) -> Mask {
        let bb = p.bbox();
        let t = reach + MASK_EPS;
        let r_lo = ((bb.min.y - t) / cell).ceil() as i32;
        let r_hi = ((bb.max.y + t) / cell).floor() as i32;
        let mut row0 = None;
        let mut runs = Vec::new();
        for r in r_lo..=r_hi {
            let y = r as f64 * cell;
            let Some((xl, xr)) = offset_span(p, t, y) else {
                if row0.is_some() {
                    break;
                }
                continue;
            };
            let lo = (xl / cell).ceil() as i32;
            let hi = (xr / cell).floor() as i32;
            if lo > hi {
                if row0.is_some() {
                    break;
                }
                continue;
            }
            row0.get_or_insert(r);
            runs.push((lo, hi));
        }
        Mask::from_runs(row0.unwrap_or(0), runs)
    }

    pub fn from_runs(row0: i32, runs: Vec<(i32, i32)>) -> Mask {
        let cells = runs.iter().map(|&(lo, hi)| (hi - lo + 1) as usize).sum();
        let mut reach2 = 0i64;
        for (k, &(lo, hi)) in runs.iter().enumerate() {
            let dr = (row0 + k as i32) as i64;
            let dc = (lo as i64).abs().max((hi as i64).abs());
            reach2 = reach2.max(dr * dr + dc * dc);
        }
        let mut m = Mask { row0, runs, cells, clear2: 0, reach2 };
        m.clear2 = m.compute_clear2();
        m
    }

    fn compute_clear2(&self) -> i64 {
        // nearest lattice offset outside the mask, searched over the box grown by one
        let (c_lo, c_hi) = self.runs.iter().fold((0, 0), |(a, b), &(lo, hi)| (a.min(lo), b.max(hi)));
        let r_lo = self.row0 - 1;
        let r_hi = self.row0 + self.runs.len() as i32;
        let mut best = i64::MAX;
        for r in r_lo..=r_hi {
            for c in c_lo - 1..=c_hi + 1 {
                if !self.contains(c, r) {
                    best = best.min((r as i64).pow(2) + (c as i64).pow(2));
                }
            }
        }
        best
    }

    pub fn contains(&self, dc: i32, dr: i32) -> bool {
        let k = dr - self.row0;
        if k < 0 || k as usize >= self.runs.len() {
            return false;
        }
        let (lo, hi) = self.runs[k as usize];
        lo <= dc && dc <= hi
    }

    pub fn rows(&self) -> impl Iterator<Item = (i32, i32, i32)> + '_ {
        self.runs.iter().enumerate().map(move |(k, &(lo, hi))| (self.row0 + k as i32, lo, hi))
    }

    pub fn offsets(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        self.rows().flat_map(|(r, lo, hi)| (lo..=hi).map(move |c| (c, r)))
    }

    /// Bounding box of the offsets as `(c_lo, c_hi, r_lo, r_hi)`.
    pub fn extent(&self) -> (i32, i32, i32, i32) {
        let (c_lo, c_hi) = self.runs.iter().fold((i32::MAX, i32::MIN), |(a, b), &(lo, hi)| (a.min(lo), b.max(hi)));
        (c_lo, c_hi, self.row0, self.row0 + self.runs.len() as i32 - 1)
    }
}

/// X-range of `{q : dist(q, p) ≤ t}` on the line `y`, for convex `p`.
fn offset_span(p: &Polygon<f64>, t: f64, y: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut take = |x: f64| {
        lo = lo.min(x);
        hi = hi.max(x);
    };
    let cut = |a: Point<f64>, b: Point<f64>, take: &mut dyn FnMut(f64)| {
        let (y0, y1) = (a.y.min(b.y), a.y.max(b.y));
        if y < y0 || y > y1 {
            return;
        }
        if a.y == b.y {
            take(a.x);
            take(b.x);
        } else {
            take(a.x + (b.x - a.x) * (y - a.y) / (b.y - a.y));
        }
    };
    for (a, b) in p.edges() {
        cut(a, b, &mut take);
        let dy = (a.y - y).abs();
        if dy <= t {
            let s = (t * t - dy * dy).max(0.0).sqrt();
            take(a.x - s);
            take(a.x + s);
        }
        if t > 0.0 {
            let d = b - a;
            let len = d.norm();
            if len > 0.0 {
                let n = Point::new(d.y, -d.x) * (t / len);
                let quad = [a + n, b + n, b - n, a - n];
                for k in 0..4 {
                    cut(quad[k], quad[(k + 1) % 4], &mut take);
                }
            }
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Per-(shape, size, orientation) data used by the generator.
#[derive(Debug, Clone)]
pub struct Footprint {
    pub shape_id: usize,
    pub size_index: usize,
    pub orientation: usize,
    pub theta: f64,
    pub size_mm: f64,
    pub area: f64,
    /// Symmetry-reduced orientation; `None` for round stones.
    pub canonical: Option<f64>,
    pub cover: usize,
    pub stamp: usize,
}

/// Every footprint of a catalog at one grid resolution, masks deduplicated.
#[derive(Debug, Clone)]
pub struct FootprintTable {
    pub cell_size: f64,
    pub margin: f64,
    pub orientations: usize,
    pub shapes: usize,
    pub sizes: usize,
    entries: Vec<Footprint>,
    masks: Vec<Mask>,
}

impl FootprintTable {
    pub fn build(catalog: &Catalog<f64>, cell_size: f64, margin: f64, orientations: usize) -> FootprintTable {
        let half_diag = cell_size * std::f64::consts::SQRT_2 / 2.0;
        let mut masks: Vec<Mask> = Vec::new();
        let mut ids: HashMap<Mask, usize> = HashMap::new();
        let mut intern = |m: Mask| -> usize {
            *ids.entry(m.clone()).or_insert_with(|| {
                masks.push(m);
                masks.len() - 1
            })
        };
        let mut entries = Vec::with_capacity(catalog.shapes.len() * catalog.sizes.len() * orientations);
        for (shape_id, shape) in catalog.shapes.iter().enumerate() {
            for (size_index, &size_mm) in catalog.sizes.iter().enumerate() {
                let area = shape.unit_outline.area() * size_mm * size_mm;
                let mut round_masks = None;
                for o in 0..orientations {
                    let theta = orientation_angle(o, orientations);
                    let (cover, stamp) = match (shape.kind == ShapeKind::Round, round_masks) {
                        (true, Some(ids)) => ids,
                        _ => {
                            let p = shape.unit_outline.transform(&Pose::new(0.0, 0.0, theta), size_mm);
                            let ids = (
                                intern(Mask::around(&p, half_diag, cell_size)),
                                intern(Mask::around(&p, margin + half_diag, cell_size)),
                            );
                            round_masks = Some(ids);
                            ids
                        }
                    };
                    entries.push(Footprint {
                        shape_id,
                        size_index,
                        orientation: o,
                        theta,
                        size_mm,
                        area,
                        canonical: canonical_orientation(shape.kind, theta),
                        cover,
                        stamp,
                    });
                }
            }
        }
        FootprintTable {
            cell_size,
            margin,
            orientations,
            shapes: catalog.shapes.len(),
            sizes: catalog.sizes.len(),
            entries,
            masks,
        }
    }

    /// Number of (shape, size, orientation) keys.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index(&self, shape_id: usize, size_index: usize, orientation: usize) -> usize {
        (shape_id * self.sizes + size_index) * self.orientations + orientation
    }

    pub fn get(&self, shape_id: usize, size_index: usize, orientation: usize) -> Option<&Footprint> {
        if shape_id >= self.shapes || size_index >= self.sizes || orientation >= self.orientations {
            return None;
        }
        self.entries.get(self.index(shape_id, size_index, orientation))
    }

    pub fn entries(&self) -> &[Footprint] {
        &self.entries
    }

    pub fn mask(&self, id: usize) -> &Mask {
        &self.masks[id]
    }

    /// Number of distinct masks after deduplication.
    pub fn unique_masks(&self) -> usize {
        self.masks.len()
    }

    /// Distinct cover masks, smallest first.
    pub fn cover_masks_by_size(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.entries.iter().map(|e| e.cover).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.sort_by_key(|&i| (self.masks[i].cells, i));
        ids
    }

    /// Largest row or column offset any stamp or cover mask reaches.
    pub fn max_extent(&self) -> i32 {
        self.masks
            .iter()
            .map(|m| {
                let (a, b, c, d) = m.extent();
                a.abs().max(b.abs()).max(c.abs()).max(d.abs())
            })
            .max()
            .unwrap_or(0)
    }
}

pub fn orientation_angle(o: usize, orientations: usize) -> f64 {
    std::f64::consts::TAU * o as f64 / orientations as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point_segment_distance;

    fn dist_to_polygon(p: &Polygon<f64>, q: Point<f64>) -> f64 {
        if p.contains_point(q) {
            return 0.0;
        }
        p.edges().map(|(a, b)| point_segment_distance(q, a, b)).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn default_table_dimensions() {
        let cat = Catalog::builtin();
        let t = FootprintTable::build(&cat, 0.25, 0.5, 16);
        assert_eq!(t.len(), 7 * 20 * 16);
        for size in 0..20 {
            let first = t.get(0, size, 0).unwrap();
            for o in 1..16 {
                let e = t.get(0, size, o).unwrap();
                assert_eq!((e.cover, e.stamp), (first.cover, first.stamp));
            }
        }
        assert!(t.unique_masks() < 2 * t.len());
    }

    #[test]
    fn masks_match_distance_oracle() {
        let cat = Catalog::builtin();
        let cell = 0.25;
        for shape in 0..7 {
            for &(size, o) in &[(0usize, 3usize), (7, 5), (15, 11)] {
                let theta = orientation_angle(o, 16);
                let p = cat.shapes[shape].unit_outline.transform(&Pose::new(0.0, 0.0, theta), cat.sizes[size]);
                for reach in [cell * 0.5f64.sqrt(), 0.5 + cell * 0.5f64.sqrt()] {
                    let m = Mask::around(&p, reach, cell);
                    let r = (cat.sizes[size] / cell) as i32 + 8;
                    for dr in -r..=r {
                        for dc in -r..=r {
                            let d = dist_to_polygon(&p, Point::new(dc as f64 * cell, dr as f64 * cell));
                            if (d - reach).abs() > 1e-7 {
                                assert_eq!(m.contains(dc, dr), d <= reach, "shape {shape} size {size} at ({dc},{dr}) d={d}");
                            }
                        }
                    }
                    assert_eq!(m.offsets().count(), m.cells);
                }
            }
        }
    }

    #[test]
    fn cover_area_bounds_stone_area() {
        let cat = Catalog::builtin();
        let cell = 0.25;
        let t = FootprintTable::build(&cat, cell, 0.5, 16);
        for e in t.entries().iter().step_by(7) {
            let m = t.mask(e.cover);
            let raster = m.cells as f64 * cell * cell;
            let p = cat.shapes[e.shape_id].unit_outline.transform(&Pose::new(0.0, 0.0, e.theta), e.size_mm);
            // cover cells reach at most one cell diagonal beyond the outline
            let bound = p.perimeter() * cell * 2f64.sqrt() + std::f64::consts::PI * 2.0 * cell * cell;
            assert!(raster >= e.area, "cover smaller than stone");
            assert!(raster - e.area <= bound, "cover {raster} too large for area {}", e.area);
        }
    }

    #[test]
    fn clear_and_reach_radii() {
        let p = Polygon::regular(64, Point::origin(), 2.0, 0.0).unwrap();
        let m = Mask::around(&p, 0.0, 1.0);
        assert!(m.contains(0, 0) && m.contains(1, 1) && !m.contains(2, 1));
        assert_eq!(m.clear2, 5);
        assert_eq!(m.reach2, 4);
        for (dc, dr) in m.offsets() {
            assert!((dc as i64).pow(2) + (dr as i64).pow(2) <= m.reach2);
        }
    }
}
