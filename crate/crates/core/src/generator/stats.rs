//! Incrementally maintained feature state of a partial design.

use crate::catalog::SHAPE_COUNT;
use crate::error::Result;
use crate::features::{adjacency_from, circular_std_from_pairs, pop_std, unity_of_adjacency};
use crate::geometry::{gap_within, BBox, Point, Polygon};

/// Welford accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        *self = self.with(x);
    }

    pub fn with(&self, x: f64) -> Welford {
        let n = self.n + 1;
        let delta = x - self.mean;
        let mean = self.mean + delta / n as f64;
        Welford { n, mean, m2: self.m2 + delta * (x - mean) }
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2.max(0.0) / self.n as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunningStats {
    sizes: Welford,
    areas: Welford,
    /// Every area except the first maximal one.
    rest: Welford,
    max_area: f64,
    shape_counts: [usize; SHAPE_COUNT],
    centroid_sum: Point<f64>,
    /// Symmetry-reduced orientations of the anisotropic stones.
    angles: Vec<f64>,
    pair_sin2: f64,
}

impl RunningStats {
    pub fn push(&mut self, shape_id: usize, size_mm: f64, area: f64, centroid: Point<f64>, canonical: Option<f64>) {
        if self.areas.n == 0 {
            self.max_area = area;
        } else if area > self.max_area {
            self.rest.push(self.max_area);
            self.max_area = area;
        } else {
            self.rest.push(area);
        }
        self.sizes.push(size_mm);
        self.areas.push(area);
        self.shape_counts[shape_id.min(SHAPE_COUNT - 1)] += 1;
        self.centroid_sum = self.centroid_sum + centroid;
        if let Some(a) = canonical {
            self.pair_sin2 += self.pair_sin2_with(a);
            self.angles.push(a);
        }
    }

    pub fn count(&self) -> usize {
        self.areas.n
    }

    pub fn mean_size(&self) -> f64 {
        self.sizes.mean
    }

    pub fn shape_counts(&self) -> [usize; SHAPE_COUNT] {
        self.shape_counts
    }

    pub fn centroid_sum(&self) -> Point<f64> {
        self.centroid_sum
    }

    pub fn proportion(&self) -> f64 {
        self.areas.std()
    }

    pub fn proportion_with(&self, area: f64) -> f64 {
        self.areas.with(area).std()
    }

    pub fn emphasis(&self) -> Option<f64> {
        (self.areas.n >= 2).then(|| (self.max_area - self.rest.mean) * self.rest.std())
    }

    pub fn balance(&self, container_centroid: Point<f64>) -> Option<f64> {
        let n = self.areas.n;
        (n >= 1).then(|| container_centroid.dist(self.centroid_sum * (1.0 / n as f64)))
    }

    pub fn harmony_shape(&self) -> f64 {
        let counts: Vec<f64> = self.shape_counts.iter().map(|&c| c as f64).collect();
        pop_std(&counts)
    }

    pub fn harmony_shape_with(&self, shape_id: usize) -> f64 {
        let mut counts = self.shape_counts;
        counts[shape_id.min(SHAPE_COUNT - 1)] += 1;
        let counts: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        pop_std(&counts)
    }

    fn pair_sin2_with(&self, a: f64) -> f64 {
        self.angles
            .iter()
            .map(|&b| {
                let s = ((b - a) * 0.5).sin();
                s * s
            })
            .sum()
    }

    pub fn harmony_orientation(&self) -> f64 {
        circular_std_from_pairs(self.pair_sin2, self.angles.len())
    }

    pub fn harmony_orientation_with(&self, canonical: Option<f64>) -> f64 {
        match canonical {
            None => self.harmony_orientation(),
            Some(a) => circular_std_from_pairs(self.pair_sin2 + self.pair_sin2_with(a), self.angles.len() + 1),
        }
    }
}

/// Stone outlines with their within-threshold gaps and exact nearest
/// neighbors, so unity can be evaluated for one extra stone cheaply.
#[derive(Debug, Clone)]
pub struct NeighborCache {
    threshold: f64,
    polys: Vec<Polygon<f64>>,
    boxes: Vec<BBox<f64>>,
    within: Vec<Vec<(usize, f64)>>,
    /// `(gap, index)` of the nearest other stone.
    nearest: Vec<Option<(f64, usize)>>,
}

fn exact_gap(a: &Polygon<f64>, b: &Polygon<f64>, threshold: f64) -> f64 {
    gap_within(a, b, threshold).unwrap_or_else(|| crate::geometry::boundary_gap(a, b))
}

fn better(cand: (f64, usize), cur: Option<(f64, usize)>) -> bool {
    match cur {
        None => true,
        Some((g, j)) => cand.0 < g || (cand.0 == g && cand.1 < j),
    }
}

impl NeighborCache {
    pub fn new(threshold: f64) -> NeighborCache {
        NeighborCache { threshold, polys: Vec::new(), boxes: Vec::new(), within: Vec::new(), nearest: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    /// Exact nearest stone to `p` among the cached ones, scanning by box distance.
    fn nearest_to(&self, p: &Polygon<f64>, bb: &BBox<f64>, known: &[(usize, f64)]) -> Option<(f64, usize)> {
        let mut order: Vec<(f64, usize)> = self.boxes.iter().enumerate().map(|(i, b)| (bb.gap_lower_bound(b), i)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut best: Option<(f64, usize)> = None;
        for (lb, i) in order {
            if let Some((g, _)) = best {
                if lb > g {
                    break;
                }
            }
            let g = match known.iter().find(|&&(j, _)| j == i) {
                Some(&(_, g)) => g,
                None => exact_gap(p, &self.polys[i], self.threshold),
            };
            if better((g, i), best) {
                best = Some((g, i));
            }
        }
        best
    }

    pub fn push(&mut self, p: Polygon<f64>) {
        let s = self.polys.len();
        let bb = p.bbox();
        let mut mine = Vec::new();
        for i in 0..s {
            if let Some(g) = gap_within(&self.polys[i], &p, self.threshold) {
                self.within[i].push((s, g));
                mine.push((i, g));
            }
        }
        for i in 0..s {
            let lb = self.boxes[i].gap_lower_bound(&bb);
            if self.nearest[i].is_none_or(|(g, _)| lb <= g) {
                let g = match mine.iter().find(|&&(j, _)| j == i) {
                    Some(&(_, g)) => g,
                    None => exact_gap(&self.polys[i], &p, self.threshold),
                };
                if better((g, s), self.nearest[i]) {
                    self.nearest[i] = Some((g, s));
                }
            }
        }
        let nearest = self.nearest_to(&p, &bb, &mine);
        self.polys.push(p);
        self.boxes.push(bb);
        self.within.push(mine);
        self.nearest.push(nearest);
    }

    /// Adjacency with fallback links, as the feature definition builds it.
    fn adjacency(&self, within: &[Vec<(usize, f64)>], nearest: &[Option<(f64, usize)>]) -> Vec<Vec<(usize, f64)>> {
        let mut adj: Vec<Vec<(usize, f64)>> = within.to_vec();
        let isolated: Vec<usize> = (0..adj.len()).filter(|&i| adj[i].is_empty()).collect();
        for i in isolated {
            if let Some((g, j)) = nearest[i] {
                if !adj[i].iter().any(|&(k, _)| k == j) {
                    adj[i].push((j, g));
                    adj[j].push((i, g));
                }
            }
        }
        for l in &mut adj {
            l.sort_by_key(|&(j, _)| j);
        }
        adj
    }

    pub fn unity(&self) -> Option<f64> {
        (self.len() >= 2).then(|| unity_of_adjacency(&self.adjacency(&self.within, &self.nearest)))
    }

    /// Unity of the cached stones plus `p`.
    pub fn unity_with(&self, p: &Polygon<f64>) -> f64 {
        let s = self.polys.len();
        if s == 0 {
            return 0.0;
        }
        let bb = p.bbox();
        let mut within = self.within.clone();
        let mut mine = Vec::new();
        for i in 0..s {
            if let Some(g) = gap_within(&self.polys[i], p, self.threshold) {
                within[i].push((s, g));
                mine.push((i, g));
            }
        }
        let mut nearest = self.nearest.clone();
        for i in 0..s {
            if !within[i].is_empty() {
                continue;
            }
            let lb = self.boxes[i].gap_lower_bound(&bb);
            if nearest[i].is_none_or(|(g, _)| lb <= g) {
                let g = exact_gap(&self.polys[i], p, self.threshold);
                if better((g, s), nearest[i]) {
                    nearest[i] = Some((g, s));
                }
            }
        }
        let own = if mine.is_empty() { self.nearest_to(p, &bb, &mine) } else { None };
        within.push(mine);
        nearest.push(own);
        unity_of_adjacency(&self.adjacency(&within, &nearest))
    }

    /// Recomputes the adjacency from scratch with the feature code's builder.
    pub fn batch_unity(&self) -> Result<Option<f64>> {
        if self.len() < 2 {
            return Ok(None);
        }
        let adj = adjacency_from(
            self.len(),
            self.threshold,
            |i, j| self.boxes[i].gap_lower_bound(&self.boxes[j]),
            |i, j| Ok(exact_gap(&self.polys[i], &self.polys[j], self.threshold)),
        )?;
        Ok(Some(unity_of_adjacency(&adj)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{emphasis_of_areas, mean};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn welford_matches_two_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..200).map(|_| rng.gen_range(1.0..300.0)).collect();
        let mut w = Welford::default();
        for (k, &x) in xs.iter().enumerate() {
            w.push(x);
            let m = mean(&xs[..=k]);
            assert!((w.mean - m).abs() <= 1e-12 * m);
            let s = pop_std(&xs[..=k]);
            assert!((w.std() - s).abs() <= 1e-9 * s.max(1.0));
        }
    }

    #[test]
    fn emphasis_tracks_first_maximum() {
        let mut st = RunningStats::default();
        let areas = [3.0, 9.0, 1.0, 9.0, 4.0, 2.5];
        for (k, &a) in areas.iter().enumerate() {
            st.push(0, 1.0, a, Point::origin(), None);
            match st.emphasis() {
                None => assert_eq!(k, 0),
                Some(e) => assert!((e - emphasis_of_areas(&areas[..=k]).unwrap()).abs() < 1e-12),
            }
        }
        let mut flat = RunningStats::default();
        for _ in 0..5 {
            flat.push(0, 1.0, 2.0, Point::origin(), None);
        }
        assert_eq!(flat.emphasis(), Some(0.0));
    }

    #[test]
    fn neighbor_cache_matches_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut cache = NeighborCache::new(1.5);
        let mut placed: Vec<Polygon<f64>> = Vec::new();
        while placed.len() < 25 {
            let c = Point::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
            let p = Polygon::regular(rng.gen_range(3..9), c, rng.gen_range(0.5..2.5), rng.gen_range(0.0..6.0)).unwrap();
            if placed.iter().any(|q| crate::geometry::boundary_gap(q, &p) < 0.2 || crate::geometry::overlap_area(q, &p) > 0.0) {
                continue;
            }
            let predicted = cache.unity_with(&p);
            cache.push(p.clone());
            placed.push(p);
            let batch = cache.batch_unity().unwrap();
            assert_eq!(cache.unity(), batch);
            if let Some(b) = batch {
                assert_eq!(predicted, b);
            }
        }
    }
}
