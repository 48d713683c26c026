use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Point, Polygon};

/// Shape of an occupancy grid. `origin` is the lower-left corner of cell (0, 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<S> {
    pub width: usize,
    pub height: usize,
    pub cell_size: S,
    pub origin: Point<S>,
}

impl<S: Scalar> GridSpec<S> {
    pub fn new(width: usize, height: usize, cell_size: S, origin: Point<S>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation("grid", "width and height must be positive"));
        }
        if !(cell_size > S::zero()) {
            return Err(Error::validation("cell_size", "must be > 0"));
        }
        Ok(GridSpec { width, height, cell_size, origin })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn col_row(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Point<S> {
        let half = S::lit(0.5);
        Point::new(
            self.origin.x + (S::from_count(col) + half) * self.cell_size,
            self.origin.y + (S::from_count(row) + half) * self.cell_size,
        )
    }

    pub fn cell_area(&self) -> S {
        self.cell_size * self.cell_size
    }
}

/// Occupancy bitmap over a [`GridSpec`]; `true` means occupied.
#[derive(Debug, Clone, PartialEq)]
pub struct BitGrid<S> {
    spec: GridSpec<S>,
    bits: Vec<bool>,
}

impl<S: Scalar> BitGrid<S> {
    pub fn empty(spec: GridSpec<S>) -> Self {
        BitGrid { bits: vec![false; spec.len()], spec }
    }

    pub fn from_bits(spec: GridSpec<S>, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != spec.len() {
            return Err(Error::validation("bits", format!("expected {} cells, got {}", spec.len(), bits.len())));
        }
        Ok(BitGrid { spec, bits })
    }

    pub fn spec(&self) -> &GridSpec<S> {
        &self.spec
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[self.spec.index(col, row)]
    }

    pub fn set(&mut self, col: usize, row: usize, v: bool) {
        let i = self.spec.index(col, row);
        self.bits[i] = v;
    }

    pub fn get_index(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    pub fn set_index(&mut self, idx: usize, v: bool) {
        self.bits[idx] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn count_free(&self) -> usize {
        self.bits.len() - self.count_ones()
    }
}

/// Maximal 4-connected set of free cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Component<S> {
    /// Row-major cell indices, ascending.
    pub cells: Vec<usize>,
    pub area: S,
}

/// Sets every cell whose center lies inside `p` (boundary inclusive).
pub fn rasterize<S: Scalar>(p: &Polygon<S>, spec: &GridSpec<S>) -> BitGrid<S> {
    let mut grid = BitGrid::empty(*spec);
    let bb = p.bbox();
    let cs = spec.cell_size;
    let eps = S::geom_eps();
    let mut xs: Vec<S> = Vec::new();
    for row in 0..spec.height {
        let y = spec.cell_center(0, row).y;
        if y < bb.min.y - eps || y > bb.max.y + eps {
            continue;
        }
        xs.clear();
        for (a, b) in p.edges() {
            if (a.y > y) != (b.y > y) {
                xs.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in xs.chunks_exact(2) {
            fill_span(&mut grid, row, pair[0] - eps, pair[1] + eps, cs);
        }
        // Horizontal edges lying exactly on the scanline belong to the boundary.
        for (a, b) in p.edges() {
            if (a.y - y).abs() <= eps && (b.y - y).abs() <= eps {
                fill_span(&mut grid, row, a.x.min(b.x) - eps, a.x.max(b.x) + eps, cs);
            }
        }
    }
    grid
}

fn fill_span<S: Scalar>(grid: &mut BitGrid<S>, row: usize, x0: S, x1: S, cs: S) {
    let spec = grid.spec;
    let half = S::lit(0.5);
    // center(col) = origin.x + (col + 0.5) * cs ∈ [x0, x1]
    let lo = ((x0 - spec.origin.x) / cs - half).ceil();
    let hi = ((x1 - spec.origin.x) / cs - half).floor();
    let max_col = S::from_count(spec.width - 1);
    let lo = lo.max(S::zero());
    let hi = hi.min(max_col);
    if lo > hi {
        return;
    }
    let (lo, hi) = (lo.to_usize().unwrap_or(0), hi.to_usize().unwrap_or(0));
    for col in lo..=hi {
        grid.set(col, row, true);
    }
}

/// Component labelling of the free cells of a raw bitmap.
#[derive(Debug, Clone)]
pub struct Labels {
    /// Component id per cell, [`Labels::OCCUPIED`] for occupied cells.
    pub labels: Vec<u32>,
    /// Cell count per component id.
    pub sizes: Vec<usize>,
}

impl Labels {
    pub const OCCUPIED: u32 = u32::MAX;

    pub fn count(&self) -> usize {
        self.sizes.len()
    }
}

/// Labels the free (`false`) cells by 4-connectivity, scanning row-major.
pub fn label_free_cells(bits: &[bool], width: usize, height: usize) -> Labels {
    let mut labels = vec![Labels::OCCUPIED; bits.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..bits.len() {
        if bits[start] || labels[start] != Labels::OCCUPIED {
            continue;
        }
        let id = sizes.len() as u32;
        let mut size = 0usize;
        labels[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            size += 1;
            let (c, r) = (i % width, i / width);
            let mut visit = |j: usize| {
                if !bits[j] && labels[j] == Labels::OCCUPIED {
                    labels[j] = id;
                    stack.push(j);
                }
            };
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < width {
                visit(i + 1);
            }
            if r > 0 {
                visit(i - width);
            }
            if r + 1 < height {
                visit(i + width);
            }
        }
        sizes.push(size);
    }
    Labels { labels, sizes }
}

/// Partitions the free cells into maximal 4-connected components.
pub fn free_components<S: Scalar>(g: &BitGrid<S>) -> Vec<Component<S>> {
    let lab = label_free_cells(&g.bits, g.width(), g.height());
    let mut cells: Vec<Vec<usize>> = lab.sizes.iter().map(|&n| Vec::with_capacity(n)).collect();
    for (i, &l) in lab.labels.iter().enumerate() {
        if l != Labels::OCCUPIED {
            cells[l as usize].push(i);
        }
    }
    let ca = g.spec.cell_area();
    cells
        .into_iter()
        .map(|cells| Component { area: S::from_count(cells.len()) * ca, cells })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::{BTreeSet, VecDeque};

    fn spec(w: usize, h: usize, cs: f64) -> GridSpec<f64> {
        GridSpec::new(w, h, cs, Point::origin()).unwrap()
    }

    #[test]
    fn square_covering_k_by_k_centers() {
        let s = spec(10, 10, 1.0);
        // centers at 0.5 .. 9.5; square [2, 5] x [2, 5] covers centers 2.5, 3.5, 4.5
        let p = Polygon::new(vec![
            Point::new(2.0, 2.0),
            Point::new(5.0, 2.0),
            Point::new(5.0, 5.0),
            Point::new(2.0, 5.0),
        ])
        .unwrap();
        let g = rasterize(&p, &s);
        assert_eq!(g.count_ones(), 9);
        assert!(g.get(2, 2) && g.get(4, 4) && !g.get(5, 5));
    }

    #[test]
    fn polygon_outside_grid_sets_nothing() {
        let p = Polygon::regular(6, Point::new(-50.0, 40.0), 3.0, 0.0).unwrap();
        assert_eq!(rasterize(&p, &spec(10, 10, 1.0)).count_ones(), 0);
    }

    #[test]
    fn raster_area_within_perimeter_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let cs = rng.gen_range(0.05..0.5);
            let p = Polygon::regular(rng.gen_range(3..40), Point::new(10.0, 10.0), rng.gen_range(2.0..8.0), 0.4).unwrap();
            let g = rasterize(&p, &spec((20.0 / cs) as usize + 1, (20.0 / cs) as usize + 1, cs));
            let err = (g.count_ones() as f64 * cs * cs - p.area()).abs();
            assert!(err <= 2.0 * p.perimeter() * cs);
        }
    }

    #[test]
    fn full_and_empty_grids() {
        let free = BitGrid::empty(spec(5, 4, 1.0));
        let comps = free_components(&free);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].cells.len(), 20);
        assert_eq!(comps[0].area, 20.0);
        let full = BitGrid::from_bits(spec(5, 4, 1.0), vec![true; 20]).unwrap();
        assert!(free_components(&full).is_empty());
    }

    #[test]
    fn diagonal_cells_are_separate_components() {
        let mut bits = vec![true; 4];
        bits[0] = false;
        bits[3] = false;
        let g = BitGrid::from_bits(spec(2, 2, 1.0), bits).unwrap();
        assert_eq!(free_components(&g).len(), 2);
    }

    fn oracle_partition(bits: &[bool], w: usize, h: usize) -> BTreeSet<BTreeSet<usize>> {
        let mut seen = vec![false; bits.len()];
        let mut out = BTreeSet::new();
        for s in 0..bits.len() {
            if bits[s] || seen[s] {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut q = VecDeque::from([s]);
            seen[s] = true;
            while let Some(i) = q.pop_front() {
                comp.insert(i);
                let (c, r) = ((i % w) as i64, (i / w) as i64);
                for (dc, dr) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let (nc, nr) = (c + dc, r + dr);
                    if nc < 0 || nr < 0 || nc >= w as i64 || nr >= h as i64 {
                        continue;
                    }
                    let j = nr as usize * w + nc as usize;
                    if !bits[j] && !seen[j] {
                        seen[j] = true;
                        q.push_back(j);
                    }
                }
            }
            out.insert(comp);
        }
        out
    }

    #[test]
    fn components_match_flood_fill_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let density = rng.gen_range(0.2..0.7);
            let bits: Vec<bool> = (0..32 * 32).map(|_| rng.gen_bool(density)).collect();
            let g = BitGrid::from_bits(spec(32, 32, 1.0), bits.clone()).unwrap();
            let got: BTreeSet<BTreeSet<usize>> =
                free_components(&g).into_iter().map(|c| c.cells.into_iter().collect()).collect();
            assert_eq!(got, oracle_partition(&bits, 32, 32));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn components_partition_free_cells(bits in proptest::collection::vec(any::<bool>(), 1..400),
                                               w in 1usize..25) {
                let h = bits.len().div_ceil(w);
                let mut bits = bits;
                bits.resize(w * h, true);
                let g = BitGrid::from_bits(spec(w, h, 1.0), bits.clone()).unwrap();
                let comps = free_components(&g);
                let mut seen = vec![false; bits.len()];
                for c in &comps {
                    prop_assert!(!c.cells.is_empty());
                    for &i in &c.cells {
                        prop_assert!(!bits[i]);
                        prop_assert!(!seen[i]);
                        seen[i] = true;
                    }
                }
                prop_assert_eq!(seen.iter().filter(|s| **s).count(), bits.iter().filter(|b| !**b).count());
            }
        }
    }
}
