//! Candidate scoring and the lazy best-first search over poses.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::catalog::ShapeKind;
use crate::geometry::{Point, Polygon, Pose};

use super::fill::FillCheck;
use super::footprint::{orientation_angle, Footprint};
use super::{Candidate, Run, Tier};

/// Per-step constants of the objective.
pub(super) struct ScoreContext<'a> {
    run: &'a Run,
    n1: f64,
    target: Point<f64>,
    mean_size: f64,
}

/// Total rank order; smaller is better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) struct RankKey {
    score: f64,
    size_dev: f64,
    radial: f64,
    shape: usize,
    size: usize,
    orientation: usize,
    row: usize,
    col: usize,
}

impl Eq for RankKey {}

impl Ord for RankKey {
    fn cmp(&self, o: &Self) -> Ordering {
        self.score
            .total_cmp(&o.score)
            .then(self.size_dev.total_cmp(&o.size_dev))
            .then(o.radial.total_cmp(&self.radial))
            .then((self.shape, self.size, self.orientation).cmp(&(o.shape, o.size, o.orientation)))
            .then((self.row, self.col).cmp(&(o.row, o.col)))
    }
}

impl PartialOrd for RankKey {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl<'a> ScoreContext<'a> {
    pub(super) fn new(run: &'a Run) -> ScoreContext<'a> {
        let n = run.stats.count();
        let n1 = (n + 1) as f64;
        // where the next centroid would have to go to center the mean
        let target = run.centroid * n1 - run.stats.centroid_sum();
        ScoreContext { run, n1, target, mean_size: run.stats.mean_size() }
    }

    pub(super) fn class_part(&self, fp: &Footprint) -> f64 {
        let p = &self.run.gen.params;
        let st = &self.run.stats;
        p.w_proportion * st.proportion_with(fp.area)
            + p.w_harmony_shape * st.harmony_shape_with(fp.shape_id)
            + p.w_harmony_orientation * st.harmony_orientation_with(fp.canonical)
    }

    pub(super) fn position_part(&self, p: Point<f64>) -> f64 {
        self.run.gen.params.w_balance * (p.dist(self.target) / self.n1)
    }

    pub(super) fn unity_part(&self, poly: &Polygon<f64>) -> f64 {
        let w = self.run.gen.params.w_unity;
        if w == 0.0 {
            0.0
        } else {
            w * self.run.neighbors.unity_with(poly)
        }
    }

    fn size_dev(&self, fp: &Footprint) -> f64 {
        if self.run.stats.count() == 0 {
            0.0
        } else {
            (fp.size_mm - self.mean_size).abs()
        }
    }

    /// `|cos(θ − φ)|`, φ the direction of `p` seen from the container centroid.
    pub(super) fn radial(&self, theta: f64, p: Point<f64>) -> f64 {
        let d = p - self.run.centroid;
        let phi = if d.x == 0.0 && d.y == 0.0 { 0.0 } else { d.y.atan2(d.x) };
        (theta - phi).cos().abs()
    }

    pub(super) fn rank_key(&self, score: f64, fp: &Footprint, col: usize, row: usize, p: Point<f64>) -> RankKey {
        RankKey {
            score,
            size_dev: self.size_dev(fp),
            radial: self.radial(fp.theta, p),
            shape: fp.shape_id,
            size: fp.size_index,
            orientation: fp.orientation,
            row,
            col,
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seeded Bernoulli draw deciding whether a pose is proposed this step.
fn keep(seed: u64, step: u64, cell: usize, orientation: usize, p: f64) -> bool {
    if p >= 1.0 {
        return true;
    }
    let h = splitmix(splitmix(seed ^ splitmix(step)) ^ ((cell as u64) << 8 | orientation as u64));
    ((h >> 11) as f64 / (1u64 << 53) as f64) < p
}

/// Orientation index most aligned with the radial direction at `p`; lowest index on ties.
pub(super) fn radial_orientation(run: &Run, p: Point<f64>) -> usize {
    let n = run.gen.params.orientations;
    let d = p - run.centroid;
    let phi = if d.x == 0.0 && d.y == 0.0 { 0.0 } else { d.y.atan2(d.x) };
    (0..n)
        .max_by(|&a, &b| {
            let ra = (orientation_angle(a, n) - phi).cos().abs();
            let rb = (orientation_angle(b, n) - phi).cos().abs();
            ra.total_cmp(&rb).then(b.cmp(&a))
        })
        .unwrap_or(0)
}

/// Free cells sorted by distance from `target`, with those distances.
fn cells_by_distance(run: &Run, target: Point<f64>) -> (Vec<u32>, Vec<f64>) {
    let w = run.grid.width;
    let mut cells: Vec<(f64, u32)> = (0..run.grid.bits().len())
        .filter(|&i| !run.grid.get(i))
        .map(|i| (run.cell_center(i % w, i / w).dist(target), i as u32))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cells.into_iter().map(|(d, i)| (i, d)).unzip()
}

/// Largest size first; among its shapes and orientations the fitting,
/// admissible pose closest to the container centroid.
pub(super) fn first_stone(run: &Run) -> Option<Candidate> {
    let table = run.gen.table.clone();
    let (order, dist) = cells_by_distance(run, run.centroid);
    let d2 = run.grid.distance2();
    let w = run.grid.width;
    let mut salvager = run.salvager.borrow_mut();
    let mut check = FillCheck::new(&run.grid, &mut salvager);
    for size in (0..table.sizes).rev() {
        let mut best: Option<(f64, Candidate)> = None;
        for shape in 0..table.shapes {
            let round = run.gen.catalog.shapes[shape].kind == ShapeKind::Round;
            let orients = if round { 1 } else { table.orientations };
            for o in 0..orients {
                let fp = table.get(shape, size, o).expect("key in range");
                let cover = table.mask(fp.cover);
                let stamp = table.mask(fp.stamp);
                for (j, &cell) in order.iter().enumerate() {
                    if best.is_some_and(|(bd, _)| dist[j] > bd) {
                        break;
                    }
                    let cell = cell as usize;
                    let (col, row) = (cell % w, cell / w);
                    if d2[cell] < cover.clear2 || (d2[cell] <= cover.reach2 && !run.grid.fits(cover, col, row)) {
                        continue;
                    }
                    if !check.admissible(&run.grid, &mut salvager, stamp, col, row) {
                        continue;
                    }
                    if best.is_none_or(|(bd, _)| dist[j] < bd) {
                        let c = Candidate { shape_id: shape, size_index: size, orientation: o, col, row, kind_id: 0 };
                        best = Some((dist[j], c));
                    }
                    break;
                }
            }
        }
        if let Some((_, c)) = best {
            return Some(run.canonical(&c));
        }
    }
    None
}

/// Ranking class: one footprint, or every orientation of a round stone.
struct Class<'t> {
    fp: &'t Footprint,
    round: bool,
    part: f64,
    size_dev: f64,
    band2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Item {
    key: f64,
    /// 0 = class bound, 1 = class + position bound, 2 = exact.
    stage: u8,
    size_dev: f64,
    radial: f64,
    class: u32,
    /// Index into the distance-ordered cell list.
    pos: u32,
    shape: u16,
    size: u16,
    orientation: u16,
    row: u32,
    col: u32,
}

impl Eq for Item {}

impl Ord for Item {
    // reversed: BinaryHeap pops the smallest key first
    fn cmp(&self, o: &Self) -> Ordering {
        let mine = (self.stage, self.shape, self.size, self.orientation, self.row, self.col);
        let theirs = (o.stage, o.shape, o.size, o.orientation, o.row, o.col);
        self.key
            .total_cmp(&o.key)
            .then(self.stage.cmp(&o.stage))
            .then(self.size_dev.total_cmp(&o.size_dev))
            .then(o.radial.total_cmp(&self.radial))
            .then(mine.cmp(&theirs))
            .then(self.class.cmp(&o.class))
            .then(self.pos.cmp(&o.pos))
            .reverse()
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Best admissible candidate at the given relaxation tier.
pub(super) fn best(run: &Run, tier: Tier, step: u64) -> Option<Candidate> {
    let table = run.gen.table.clone();
    let params = run.gen.params.clone();
    let ctx = ScoreContext::new(run);
    let (order, dist) = cells_by_distance(run, ctx.target);
    if order.is_empty() {
        return None;
    }
    let d2 = run.grid.distance2();
    let max_d2 = order.iter().map(|&i| d2[i as usize]).max().unwrap_or(0);
    let w = run.grid.width;

    let mut classes: Vec<Class> = Vec::new();
    for fp in table.entries() {
        let round = run.gen.catalog.shapes[fp.shape_id].kind == ShapeKind::Round;
        if round && fp.orientation != 0 {
            continue;
        }
        let cover = table.mask(fp.cover);
        if max_d2 < cover.clear2 {
            continue;
        }
        let band = (cover.reach2 as f64).sqrt() + 1.0;
        classes.push(Class { fp, round, part: ctx.class_part(fp), size_dev: ctx.size_dev(fp), band2: band * band + 1e-9 });
    }

    let valid = |k: &Class, cell: usize| -> bool {
        let cover = table.mask(k.fp.cover);
        let d = d2[cell];
        if d < cover.clear2 {
            return false;
        }
        if tier == Tier::Snug {
            if d as f64 > k.band2 {
                return false;
            }
            let o = if k.round { 0 } else { k.fp.orientation };
            if !keep(run.seed, step, cell, o, params.keep_probability) {
                return false;
            }
        }
        d > cover.reach2 || run.grid.fits(cover, cell % w, cell / w)
    };
    let next_pos = |k: &Class, from: usize| -> Option<usize> { (from..order.len()).find(|&j| valid(k, order[j] as usize)) };
    let pos_item = |ci: usize, k: &Class, j: usize| -> Item {
        let cell = order[j] as usize;
        Item {
            key: k.part + params.w_balance * (dist[j] / ctx.n1),
            stage: 1,
            size_dev: k.size_dev,
            radial: 0.0,
            class: ci as u32,
            pos: j as u32,
            shape: k.fp.shape_id as u16,
            size: k.fp.size_index as u16,
            orientation: k.fp.orientation as u16,
            row: (cell / w) as u32,
            col: (cell % w) as u32,
        }
    };

    let mut heap: BinaryHeap<Item> = classes
        .iter()
        .enumerate()
        .map(|(ci, k)| Item {
            key: k.part,
            stage: 0,
            size_dev: k.size_dev,
            radial: 0.0,
            class: ci as u32,
            pos: 0,
            shape: k.fp.shape_id as u16,
            size: k.fp.size_index as u16,
            orientation: k.fp.orientation as u16,
            row: 0,
            col: 0,
        })
        .collect();

    let mut check: Option<FillCheck> = None;
    while let Some(it) = heap.pop() {
        let k = &classes[it.class as usize];
        match it.stage {
            0 => {
                if let Some(j) = next_pos(k, 0) {
                    heap.push(pos_item(it.class as usize, k, j));
                }
            }
            1 => {
                let j = it.pos as usize;
                if let Some(nj) = next_pos(k, j + 1) {
                    heap.push(pos_item(it.class as usize, k, nj));
                }
                let (col, row) = (it.col as usize, it.row as usize);
                let p = run.cell_center(col, row);
                let fp = if k.round {
                    let o = radial_orientation(run, p);
                    table.get(k.fp.shape_id, k.fp.size_index, o).expect("key in range")
                } else {
                    k.fp
                };
                let pose = Pose::new(p.x, p.y, fp.theta);
                let poly = run.gen.catalog.shapes[fp.shape_id].unit_outline.transform(&pose, fp.size_mm);
                let score = k.part + params.w_balance * (dist[j] / ctx.n1) + ctx.unity_part(&poly);
                heap.push(Item {
                    key: score,
                    stage: 2,
                    radial: ctx.radial(fp.theta, p),
                    orientation: fp.orientation as u16,
                    ..it
                });
            }
            _ => {
                let cand = Candidate {
                    shape_id: it.shape as usize,
                    size_index: it.size as usize,
                    orientation: it.orientation as usize,
                    col: it.col as usize,
                    row: it.row as usize,
                    kind_id: 0,
                };
                if tier == Tier::Saturate {
                    return Some(cand);
                }
                let fp = table.get(cand.shape_id, cand.size_index, cand.orientation).expect("key in range");
                let mut salvager = run.salvager.borrow_mut();
                let fc = check.get_or_insert_with(|| FillCheck::new(&run.grid, &mut salvager));
                if fc.admissible(&run.grid, &mut salvager, table.mask(fp.stamp), cand.col, cand.row) {
                    return Some(cand);
                }
            }
        }
    }
    None
}
