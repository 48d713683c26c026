//! The six aesthetic features of a design.
//!
//! All spreads are population standard deviations. Orientation spread is a
//! circular standard deviation over symmetry-reduced angles, see
//! [`canonical_orientation`].

use serde::Serialize;

use crate::catalog::{ShapeKind, SHAPE_COUNT};
use crate::design::Layout;
use crate::error::{Error, Result};
use crate::geometry::{min_gap, normalize_angle, BBox, Point, Polygon};
use crate::scalar::Scalar;

pub const FEATURE_NAMES: [&str; 6] =
    ["balance", "emphasis", "harmony_shape", "harmony_orientation", "proportion", "unity"];

/// Rotation order shared by every anisotropic built-in cut (lcm of 1, 2, 3, 4).
pub const COMMON_SYMMETRY_ORDER: u32 = 12;

/// Floor on the mean resultant length so the orientation spread stays finite.
const MIN_RESULTANT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureParams<S> {
    /// Stones whose boundary gap is at most this are neighbors (δ_N).
    pub neighbor_threshold: S,
}

impl<S: Scalar> FeatureParams<S> {
    /// δ_N = 3 × bezel margin.
    pub fn from_margin(margin: S) -> Self {
        FeatureParams { neighbor_threshold: S::lit(3.0) * margin }
    }
}

impl<S: Scalar> Default for FeatureParams<S> {
    fn default() -> Self {
        Self::from_margin(S::lit(0.5))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureVector<S> {
    pub balance: S,
    pub emphasis: S,
    pub harmony_shape: S,
    pub harmony_orientation: S,
    pub proportion: S,
    pub unity: S,
}

impl<S: Scalar> FeatureVector<S> {
    pub fn to_array(&self) -> [S; 6] {
        [self.balance, self.emphasis, self.harmony_shape, self.harmony_orientation, self.proportion, self.unity]
    }

    pub fn from_array(a: [S; 6]) -> Self {
        FeatureVector {
            balance: a[0],
            emphasis: a[1],
            harmony_shape: a[2],
            harmony_orientation: a[3],
            proportion: a[4],
            unity: a[5],
        }
    }
}

pub fn mean<S: Scalar>(xs: &[S]) -> S {
    if xs.is_empty() {
        return S::zero();
    }
    xs.iter().copied().sum::<S>() / S::from_count(xs.len())
}

/// Population standard deviation; 0 for empty input.
pub fn pop_std<S: Scalar>(xs: &[S]) -> S {
    if xs.is_empty() {
        return S::zero();
    }
    let m = mean(xs);
    let var = xs.iter().map(|&x| (x - m) * (x - m)).sum::<S>() / S::from_count(xs.len());
    var.sqrt()
}

/// Reduces an orientation by the shared symmetry order and rescales it to
/// `[0, 2π)`. `None` for isotropic (round) stones.
pub fn canonical_orientation<S: Scalar>(shape: ShapeKind, theta: S) -> Option<S> {
    if shape.is_isotropic() {
        return None;
    }
    Some(normalize_angle(S::from_count(COMMON_SYMMETRY_ORDER as usize) * normalize_angle(theta)))
}

/// `√(−2 ln R)`, with `1 − R²` accumulated from pairwise half-angle sines.
pub fn circular_std<S: Scalar>(angles: &[S]) -> S {
    let n = angles.len();
    let half = S::lit(0.5);
    let mut acc = S::zero();
    for i in 0..n {
        for j in i + 1..n {
            let s = ((angles[i] - angles[j]) * half).sin();
            acc = acc + s * s;
        }
    }
    circular_std_from_pairs(acc, n)
}

/// Circular standard deviation of `n` angles given `Σ_{i<j} sin²((a_i − a_j)/2)`.
pub fn circular_std_from_pairs<S: Scalar>(pair_sin2: S, n: usize) -> S {
    if n < 2 {
        return S::zero();
    }
    let nn = S::from_count(n);
    let one_minus_r2 = S::lit(4.0) * pair_sin2 / (nn * nn);
    let floor = S::lit(MIN_RESULTANT * MIN_RESULTANT);
    let r2 = (S::one() - one_minus_r2).max(floor);
    let neg_ln_r2 = if r2 > floor { -(-one_minus_r2).ln_1p() } else { -r2.ln() };
    neg_ln_r2.max(S::zero()).sqrt()
}

fn require<S>(layout: &Layout<S>, n: usize, what: &str) -> Result<()> {
    if layout.stones.len() < n {
        return Err(Error::UndefinedFeature(format!(
            "{what} needs at least {n} stone(s), design has {}",
            layout.stones.len()
        )));
    }
    Ok(())
}

pub fn balance<S: Scalar>(layout: &Layout<S>) -> Result<S> {
    require(layout, 1, "balance")?;
    let c = layout.container.centroid();
    let n = S::from_count(layout.stones.len());
    let sum = layout.stones.iter().fold(Point::origin(), |acc, s| acc + s.centroid());
    Ok(c.dist(sum * (S::one() / n)))
}

/// `(A_max − mean(rest)) · popstd(rest)`, dropping the first maximal area.
pub fn emphasis_of_areas<S: Scalar>(areas: &[S]) -> Result<S> {
    if areas.len() < 2 {
        return Err(Error::UndefinedFeature(format!("emphasis needs at least 2 stones, got {}", areas.len())));
    }
    let mut imax = 0;
    for (i, &a) in areas.iter().enumerate() {
        if a > areas[imax] {
            imax = i;
        }
    }
    let rest: Vec<S> = areas.iter().enumerate().filter(|(i, _)| *i != imax).map(|(_, &a)| a).collect();
    Ok((areas[imax] - mean(&rest)) * pop_std(&rest))
}

pub fn emphasis<S: Scalar>(layout: &Layout<S>) -> Result<S> {
    let areas: Vec<S> = layout.stones.iter().map(|s| s.area()).collect();
    emphasis_of_areas(&areas)
}

pub fn shape_counts<S>(layout: &Layout<S>) -> [usize; SHAPE_COUNT] {
    let mut counts = [0usize; SHAPE_COUNT];
    for s in &layout.stones {
        counts[s.shape_id.min(SHAPE_COUNT - 1)] += 1;
    }
    counts
}

pub fn harmony_shape<S: Scalar>(layout: &Layout<S>) -> S {
    let counts: Vec<S> = shape_counts(layout).iter().map(|&c| S::from_count(c)).collect();
    pop_std(&counts)
}

pub fn harmony_orientation<S: Scalar>(layout: &Layout<S>) -> S {
    let angles: Vec<S> = layout.stones.iter().filter_map(|s| canonical_orientation(s.shape, s.theta)).collect();
    circular_std(&angles)
}

pub fn proportion<S: Scalar>(layout: &Layout<S>) -> S {
    let areas: Vec<S> = layout.stones.iter().map(|s| s.area()).collect();
    pop_std(&areas)
}

/// Symmetric adjacency: pairs within `threshold`, plus every isolated
/// stone joined to its single nearest stone. Lists hold `(neighbor, gap)`.
pub fn adjacency_from<S: Scalar>(
    n: usize,
    threshold: S,
    mut gap_lower_bound: impl FnMut(usize, usize) -> S,
    mut gap: impl FnMut(usize, usize) -> Result<S>,
) -> Result<Vec<Vec<(usize, S)>>> {
    let mut adj: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
    if n < 2 {
        return Ok(adj);
    }
    let mut known = std::collections::HashMap::new();
    for i in 0..n {
        for j in i + 1..n {
            if gap_lower_bound(i, j) <= threshold {
                let g = gap(i, j)?;
                known.insert((i, j), g);
                if g <= threshold {
                    adj[i].push((j, g));
                    adj[j].push((i, g));
                }
            }
        }
    }
    let isolated: Vec<usize> = (0..n).filter(|&i| adj[i].is_empty()).collect();
    for i in isolated {
        let mut order: Vec<(S, usize)> = (0..n).filter(|&j| j != i).map(|j| (gap_lower_bound(i, j), j)).collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut best: Option<(S, usize)> = None;
        for (lb, j) in order {
            if let Some((bg, _)) = best {
                if lb > bg {
                    break;
                }
            }
            let key = (i.min(j), i.max(j));
            let g = match known.get(&key) {
                Some(&g) => g,
                None => {
                    let g = gap(key.0, key.1)?;
                    known.insert(key, g);
                    g
                }
            };
            if best.is_none_or(|(bg, bj)| g < bg || (g == bg && j < bj)) {
                best = Some((g, j));
            }
        }
        if let Some((g, j)) = best {
            if !adj[i].iter().any(|&(k, _)| k == j) {
                adj[i].push((j, g));
                adj[j].push((i, g));
            }
        }
    }
    for list in &mut adj {
        list.sort_by_key(|&(j, _)| j);
    }
    Ok(adj)
}

fn polygon_adjacency<S: Scalar>(polys: &[&Polygon<S>], threshold: S) -> Result<Vec<Vec<(usize, S)>>> {
    let boxes: Vec<BBox<S>> = polys.iter().map(|p| p.bbox()).collect();
    adjacency_from(polys.len(), threshold, |i, j| boxes[i].gap_lower_bound(&boxes[j]), |i, j| min_gap(polys[i], polys[j]))
}

/// Neighbor lists (indices only) of every stone.
pub fn neighbors<S: Scalar>(layout: &Layout<S>, params: &FeatureParams<S>) -> Result<Vec<Vec<usize>>> {
    let polys: Vec<&Polygon<S>> = layout.stones.iter().map(|s| &s.polygon).collect();
    let adj = polygon_adjacency(&polys, params.neighbor_threshold)?;
    Ok(adj.into_iter().map(|l| l.into_iter().map(|(j, _)| j).collect()).collect())
}

/// Population stddev of per-stone mean neighbor gaps.
pub fn unity_of_adjacency<S: Scalar>(adj: &[Vec<(usize, S)>]) -> S {
    let means: Vec<S> = adj
        .iter()
        .map(|l| mean(&l.iter().map(|&(_, g)| g).collect::<Vec<_>>()))
        .collect();
    pop_std(&means)
}

pub fn unity<S: Scalar>(layout: &Layout<S>, params: &FeatureParams<S>) -> Result<S> {
    require(layout, 2, "unity")?;
    let polys: Vec<&Polygon<S>> = layout.stones.iter().map(|s| &s.polygon).collect();
    Ok(unity_of_adjacency(&polygon_adjacency(&polys, params.neighbor_threshold)?))
}

pub fn feature_vector<S: Scalar>(layout: &Layout<S>, params: &FeatureParams<S>) -> Result<FeatureVector<S>> {
    require(layout, 2, "feature vector")?;
    Ok(FeatureVector {
        balance: balance(layout)?,
        emphasis: emphasis(layout)?,
        harmony_shape: harmony_shape(layout),
        harmony_orientation: harmony_orientation(layout),
        proportion: proportion(layout),
        unity: unity(layout, params)?,
    })
}
