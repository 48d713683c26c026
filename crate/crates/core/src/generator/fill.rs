//! Fillability of free regions: the memoized salvage test and the
//! no-dead-space candidate filter.

use std::collections::HashMap;
use std::sync::Arc;

use crate::geometry::{label_free_cells, Labels};

use super::footprint::FootprintTable;
use super::occupancy::{distance2, Occupancy};

/// Normalized cell set of a component: bounding-box size and packed bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct ShapeKey {
    w: u32,
    h: u32,
    bits: Vec<u64>,
}

/// Decides whether a free component is salvageable: smaller than the slack
/// area, or able to hold at least one footprint. Results are memoized by
/// the component's translation-normalized cell set.
#[derive(Debug, Clone)]
pub struct Salvager {
    table: Arc<FootprintTable>,
    /// Components with fewer cells than this are slivers.
    slack_cells: f64,
    covers: Vec<usize>,
    memo: HashMap<ShapeKey, bool>,
    hits: usize,
}

impl Salvager {
    pub fn new(table: Arc<FootprintTable>, slack_area: f64) -> Salvager {
        let cell = table.cell_size;
        let covers = table.cover_masks_by_size();
        Salvager { table, slack_cells: slack_area / (cell * cell), covers, memo: HashMap::new(), hits: 0 }
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    pub fn memo_hits(&self) -> usize {
        self.hits
    }

    pub fn is_sliver(&self, cells: usize) -> bool {
        (cells as f64) < self.slack_cells
    }

    /// `cells` are indices into a grid of the given width; they must form
    /// one component.
    pub fn salvageable(&mut self, cells: &[usize], width: usize) -> bool {
        if self.is_sliver(cells.len()) {
            return true;
        }
        let (key, local, lw, lh) = normalize(cells, width);
        if let Some(&v) = self.memo.get(&key) {
            self.hits += 1;
            return v;
        }
        let v = self.any_fit(&local, lw, lh);
        self.memo.insert(key, v);
        v
    }

    fn any_fit(&self, free: &[bool], w: usize, h: usize) -> bool {
        let occ: Vec<bool> = free.iter().map(|f| !f).collect();
        let d2 = distance2(&occ, w, h);
        let max_d2 = d2.iter().zip(free).filter(|(_, f)| **f).map(|(d, _)| *d).max().unwrap_or(0);
        let grid = Occupancy::new(w, h, occ);
        for &id in &self.covers {
            let m = self.table.mask(id);
            if max_d2 < m.clear2 {
                continue;
            }
            for (i, &d) in d2.iter().enumerate() {
                if !free[i] || d < m.clear2 {
                    continue;
                }
                if d > m.reach2 || grid.fits(m, i % w, i / w) {
                    return true;
                }
            }
        }
        false
    }
}

fn normalize(cells: &[usize], width: usize) -> (ShapeKey, Vec<bool>, usize, usize) {
    let (mut c0, mut c1, mut r0, mut r1) = (usize::MAX, 0, usize::MAX, 0);
    for &i in cells {
        let (c, r) = (i % width, i / width);
        c0 = c0.min(c);
        c1 = c1.max(c);
        r0 = r0.min(r);
        r1 = r1.max(r);
    }
    let (w, h) = (c1 - c0 + 1, r1 - r0 + 1);
    let mut local = vec![false; w * h];
    let mut bits = vec![0u64; (w * h).div_ceil(64)];
    for &i in cells {
        let j = (i / width - r0) * w + (i % width - c0);
        local[j] = true;
        bits[j / 64] |= 1 << (j % 64);
    }
    (ShapeKey { w: w as u32, h: h as u32, bits }, local, w, h)
}

/// Free-component view of one grid state, reused across every candidate
/// evaluated against that state.
#[derive(Debug)]
pub struct FillCheck {
    labels: Labels,
    /// Component cells by label.
    members: Vec<Vec<usize>>,
    /// Labels of components that are not salvageable as they stand.
    dead: Vec<u32>,
    mark: Vec<u32>,
    epoch: u32,
    scratch: Vec<usize>,
    stack: Vec<usize>,
    piece: Vec<usize>,
}

impl FillCheck {
    pub fn new(occ: &Occupancy, salvager: &mut Salvager) -> FillCheck {
        let labels = label_free_cells(occ.bits(), occ.width, occ.height);
        let mut members: Vec<Vec<usize>> = labels.sizes.iter().map(|&n| Vec::with_capacity(n)).collect();
        for (i, &l) in labels.labels.iter().enumerate() {
            if l != Labels::OCCUPIED {
                members[l as usize].push(i);
            }
        }
        let dead = (0..members.len())
            .filter(|&l| !salvager.salvageable(&members[l], occ.width))
            .map(|l| l as u32)
            .collect();
        FillCheck {
            labels,
            members,
            dead,
            mark: vec![0; occ.bits().len()],
            epoch: 0,
            scratch: Vec::new(),
            stack: Vec::new(),
            piece: Vec::new(),
        }
    }

    pub fn components(&self) -> usize {
        self.members.len()
    }

    /// Labels of the components that already fail the salvage test.
    pub fn dead_components(&self) -> &[u32] {
        &self.dead
    }

    /// True iff stamping `stamp` at `(col, row)` leaves every free
    /// component salvageable.
    pub fn admissible(
        &mut self,
        occ: &Occupancy,
        salvager: &mut Salvager,
        stamp: &super::footprint::Mask,
        col: usize,
        row: usize,
    ) -> bool {
        let w = occ.width;
        let h = occ.height;
        self.epoch = self.epoch.wrapping_add(2);
        if self.epoch < 2 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 2;
        }
        let (stamped, seen) = (self.epoch, self.epoch + 1);
        let mut cells = std::mem::take(&mut self.scratch);
        occ.covered_free(stamp, col, row, &mut cells);
        for &i in &cells {
            self.mark[i] = stamped;
        }
        let mut touched: Vec<u32> = cells.iter().map(|&i| self.labels.labels[i]).collect();
        touched.sort_unstable();
        touched.dedup();
        let ok = self.dead.iter().all(|d| touched.binary_search(d).is_ok()) && {
            let mut ok = true;
            'outer: for &i in &cells {
                let (c, r) = (i % w, i / w);
                let nbrs = [
                    (c > 0).then(|| i - 1),
                    (c + 1 < w).then(|| i + 1),
                    (r > 0).then(|| i - w),
                    (r + 1 < h).then(|| i + w),
                ];
                for j in nbrs.into_iter().flatten() {
                    if occ.get(j) || self.mark[j] == stamped || self.mark[j] == seen {
                        continue;
                    }
                    self.flood(occ, j, stamped, seen);
                    let piece = std::mem::take(&mut self.piece);
                    let good = salvager.salvageable(&piece, w);
                    self.piece = piece;
                    if !good {
                        ok = false;
                        break 'outer;
                    }
                }
            }
            ok
        };
        self.scratch = cells;
        ok
    }

    fn flood(&mut self, occ: &Occupancy, start: usize, stamped: u32, seen: u32) {
        let (w, h) = (occ.width, occ.height);
        self.piece.clear();
        self.stack.clear();
        self.mark[start] = seen;
        self.stack.push(start);
        while let Some(i) = self.stack.pop() {
            self.piece.push(i);
            let (c, r) = (i % w, i / w);
            let nbrs = [
                (c > 0).then(|| i - 1),
                (c + 1 < w).then(|| i + 1),
                (r > 0).then(|| i - w),
                (r + 1 < h).then(|| i + w),
            ];
            for j in nbrs.into_iter().flatten() {
                if !occ.get(j) && self.mark[j] != stamped && self.mark[j] != seen {
                    self.mark[j] = seen;
                    self.stack.push(j);
                }
            }
        }
        self.piece.sort_unstable();
    }

    /// Cells of component `label`.
    pub fn members(&self, label: u32) -> &[usize] {
        &self.members[label as usize]
    }
}
