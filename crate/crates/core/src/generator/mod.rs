//! Sequential stone placement.
//!
//! Each step proposes poses on the occupancy grid, keeps the ones whose
//! placement leaves every free region fillable (or negligible), ranks them
//! by the aesthetic objective and places the best. Proposals are searched
//! lazily: class-level partial scores bound everything below them, so only
//! the head of the ranking is ever materialized.

mod fill;
mod footprint;
mod occupancy;
mod search;
mod stats;

use std::cell::RefCell;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{Catalog, ShapeKind};
use crate::design::{ContainerSpec, Design, Layout, Placement, Stone};
use crate::error::{Error, Result};
use crate::features::FeatureParams;
use crate::geometry::{label_free_cells, Labels, Point, Polygon, Pose};

pub use fill::{FillCheck, Salvager};
pub use footprint::{orientation_angle, Footprint, FootprintTable, Mask};
pub use occupancy::{distance2, Occupancy};
pub use stats::{NeighborCache, RunningStats, Welford};

/// Tunable generator knobs. Lengths in mm, areas in mm².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub cell_size: f64,
    pub orientations: usize,
    pub margin: f64,
    /// Free regions below this area are ignored; `None` means half the smallest stone.
    pub slack_area: Option<f64>,
    pub w_balance: f64,
    pub w_harmony_shape: f64,
    pub w_harmony_orientation: f64,
    pub w_proportion: f64,
    pub w_unity: f64,
    pub min_stones: usize,
    pub max_stones: usize,
    pub stop_free_fraction: f64,
    /// Probability that a snug pose is proposed at a given step.
    pub keep_probability: f64,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            cell_size: 0.25,
            orientations: 16,
            margin: 0.5,
            slack_area: None,
            w_balance: 1.0,
            w_harmony_shape: 1.0,
            w_harmony_orientation: 1.0,
            w_proportion: 1.0,
            w_unity: 1.0,
            min_stones: 5,
            max_stones: 60,
            stop_free_fraction: 0.05,
            keep_probability: 0.7,
            seed: 0,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let v = |ok: bool, field: &str, msg: &str| if ok { Ok(()) } else { Err(Error::validation(field, msg)) };
        v(self.cell_size > 0.0 && self.cell_size.is_finite(), "cell_size", "must be > 0")?;
        v(self.orientations >= 1, "orientations", "must be ≥ 1")?;
        v(self.margin >= 0.0 && self.margin.is_finite(), "margin", "must be ≥ 0")?;
        if let Some(a) = self.slack_area {
            v(a >= 0.0 && a.is_finite(), "slack_area", "must be ≥ 0")?;
        }
        for (name, w) in [
            ("w_balance", self.w_balance),
            ("w_harmony_shape", self.w_harmony_shape),
            ("w_harmony_orientation", self.w_harmony_orientation),
            ("w_proportion", self.w_proportion),
            ("w_unity", self.w_unity),
        ] {
            v(w >= 0.0 && w.is_finite(), name, "weights must be ≥ 0")?;
        }
        v(self.max_stones >= 1, "max_stones", "must be ≥ 1")?;
        v(self.min_stones <= self.max_stones, "min_stones", "must not exceed max_stones")?;
        v((0.0..1.0).contains(&self.stop_free_fraction), "stop_free_fraction", "must be in [0, 1)")?;
        v((0.0..=1.0).contains(&self.keep_probability) && self.keep_probability > 0.0, "keep_probability", "must be in (0, 1]")
    }

    pub fn feature_params(&self) -> FeatureParams<f64> {
        FeatureParams::from_margin(self.margin)
    }

    /// Short hash of every knob except the seed.
    pub fn fingerprint(&self) -> String {
        let mut p = self.clone();
        p.seed = 0;
        let json = serde_json::to_string(&p).expect("params serialize");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// A proposed stone: footprint key, anchor cell and kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Candidate {
    pub shape_id: usize,
    pub size_index: usize,
    pub orientation: usize,
    pub col: usize,
    pub row: usize,
    pub kind_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoneReason {
    /// No admissible pose remains.
    Exhausted,
    MaxStones,
    FreeFraction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Placed(Placement),
    Done(DoneReason),
}

/// Which relaxation produced a placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    First,
    /// Snug, subsampled poses that pass the fill filter.
    Snug,
    /// Every fitting pose that passes the fill filter.
    Full,
    /// Every fitting pose, filter waived.
    Saturate,
}

/// Shared, immutable generator setup: catalog, params and footprints.
#[derive(Debug, Clone)]
pub struct Generator {
    catalog: Arc<Catalog<f64>>,
    params: GenParams,
    table: Arc<FootprintTable>,
    slack_area: f64,
}

impl Generator {
    pub fn new(catalog: impl Into<Arc<Catalog<f64>>>, params: GenParams) -> Result<Generator> {
        params.validate()?;
        let catalog = catalog.into();
        let table = Arc::new(FootprintTable::build(&catalog, params.cell_size, params.margin, params.orientations));
        let slack_area = params.slack_area.unwrap_or(0.5 * catalog.smallest_stone_area());
        Ok(Generator { catalog, params, table, slack_area })
    }

    pub fn catalog(&self) -> &Catalog<f64> {
        &self.catalog
    }

    pub fn params(&self) -> &GenParams {
        &self.params
    }

    pub fn table(&self) -> &Arc<FootprintTable> {
        &self.table
    }

    pub fn slack_area(&self) -> f64 {
        self.slack_area
    }

    pub fn salvager(&self) -> Salvager {
        Salvager::new(self.table.clone(), self.slack_area)
    }

    /// Starts a run on a container outline.
    pub fn start(&self, container: &Polygon<f64>, seed: u64) -> Result<Run> {
        let smallest = self.catalog.smallest_stone_area();
        if container.area() < smallest {
            return Err(Error::ContainerTooSmall { container_area: container.area(), stone_area: smallest });
        }
        let c = self.params.cell_size;
        let pad = self.table.max_extent() as i64 + 2;
        let bb = container.bbox();
        let i0 = (bb.min.x / c).floor() as i64 - pad;
        let j0 = (bb.min.y / c).floor() as i64 - pad;
        let i1 = (bb.max.x / c).ceil() as i64 + pad;
        let j1 = (bb.max.y / c).ceil() as i64 + pad;
        let (w, h) = ((i1 - i0 + 1) as usize, (j1 - j0 + 1) as usize);
        let keep_out = self.params.margin + c * std::f64::consts::SQRT_2 / 2.0 + 1e-9;
        let mut bits = vec![true; w * h];
        for row in 0..h {
            for col in 0..w {
                let p = Point::new((i0 + col as i64) as f64 * c, (j0 + row as i64) as f64 * c);
                if container.contains_point(p) && container.boundary_distance(p) > keep_out {
                    bits[row * w + col] = false;
                }
            }
        }
        let lattice = Lattice { i0, j0, cell: c, origin: None };
        Ok(self.run_on(container.clone(), Occupancy::new(w, h, bits), lattice, seed))
    }

    /// Starts a run on a raw occupancy grid (cell `(0, 0)` centered at
    /// `origin`); the container is the grid rectangle.
    pub fn start_on_grid(&self, bits: Vec<bool>, width: usize, height: usize, origin: Point<f64>, seed: u64) -> Result<Run> {
        if bits.len() != width * height || width == 0 || height == 0 {
            return Err(Error::validation("grid", "bitmap does not match its dimensions"));
        }
        let c = self.params.cell_size;
        let lo = origin - Point::new(c / 2.0, c / 2.0);
        let container = Polygon::new(vec![
            lo,
            lo + Point::new(width as f64 * c, 0.0),
            lo + Point::new(width as f64 * c, height as f64 * c),
            lo + Point::new(0.0, height as f64 * c),
        ])?;
        let lattice = Lattice { i0: 0, j0: 0, cell: c, origin: Some(origin) };
        Ok(self.run_on(container, Occupancy::new(width, height, bits), lattice, seed))
    }

    fn run_on(&self, container: Polygon<f64>, grid: Occupancy, lattice: Lattice, seed: u64) -> Run {
        Run {
            gen: self.clone(),
            centroid: container.centroid(),
            container,
            salvager: RefCell::new(self.salvager()),
            grid,
            lattice,
            placements: Vec::new(),
            stones: Vec::new(),
            stats: RunningStats::default(),
            neighbors: NeighborCache::new(self.params.feature_params().neighbor_threshold),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            tiers: Vec::new(),
            done: None,
        }
    }

    /// Runs to completion and packages the result.
    pub fn generate(&self, container: &ContainerSpec, design_id: &str, seed: u64) -> Result<Design> {
        self.generate_traced(container, design_id, seed).map(|(d, _)| d)
    }

    /// Like [`Generator::generate`] but also returns the finished run.
    pub fn generate_traced(&self, container: &ContainerSpec, design_id: &str, seed: u64) -> Result<(Design, Run)> {
        let poly = container.polygon::<f64>()?;
        let mut run = self.start(&poly, seed)?;
        while let Step::Placed(_) = run.place_next()? {}
        let design = Design {
            design_id: design_id.to_string(),
            seed,
            params_fingerprint: self.params.fingerprint(),
            container: container.clone(),
            placements: run.placements.clone(),
        };
        if run.placements.len() < self.params.min_stones {
            return Err(Error::GenerationFailed {
                reason: format!(
                    "placed {} of the required {} stones ({:?})",
                    run.placements.len(),
                    self.params.min_stones,
                    run.done.unwrap_or(DoneReason::Exhausted)
                ),
                partial: Box::new(design),
            });
        }
        Ok((design, run))
    }
}

/// Maps grid cells to design coordinates.
#[derive(Debug, Clone, Copy)]
struct Lattice {
    i0: i64,
    j0: i64,
    cell: f64,
    origin: Option<Point<f64>>,
}

impl Lattice {
    fn center(&self, col: usize, row: usize) -> Point<f64> {
        match self.origin {
            None => Point::new((self.i0 + col as i64) as f64 * self.cell, (self.j0 + row as i64) as f64 * self.cell),
            Some(o) => Point::new(o.x + col as f64 * self.cell, o.y + row as f64 * self.cell),
        }
    }
}

/// One generation in progress (the generator state).
#[derive(Debug, Clone)]
pub struct Run {
    gen: Generator,
    container: Polygon<f64>,
    centroid: Point<f64>,
    salvager: RefCell<Salvager>,
    grid: Occupancy,
    lattice: Lattice,
    placements: Vec<Placement>,
    stones: Vec<Stone<f64>>,
    stats: RunningStats,
    neighbors: NeighborCache,
    rng: ChaCha8Rng,
    seed: u64,
    tiers: Vec<Tier>,
    done: Option<DoneReason>,
}

impl Run {
    pub fn generator(&self) -> &Generator {
        &self.gen
    }

    pub fn container(&self) -> &Polygon<f64> {
        &self.container
    }

    pub fn occupancy(&self) -> &Occupancy {
        &self.grid
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    pub fn stats(&self) -> &RunningStats {
        &self.stats
    }

    pub fn neighbors(&self) -> &NeighborCache {
        &self.neighbors
    }

    /// Relaxation tier of every placement so far.
    pub fn tiers(&self) -> &[Tier] {
        &self.tiers
    }

    pub fn done_reason(&self) -> Option<DoneReason> {
        self.done
    }

    pub fn salvager_mut(&mut self) -> &mut Salvager {
        self.salvager.get_mut()
    }

    pub fn layout(&self) -> Layout<f64> {
        Layout { container: self.container.clone(), stones: self.stones.clone() }
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Point<f64> {
        self.lattice.center(col, row)
    }

    /// Free area over container area.
    pub fn free_fraction(&self) -> f64 {
        let c = self.gen.params.cell_size;
        self.grid.free_count() as f64 * c * c / self.container.area()
    }

    pub fn pose(&self, c: &Candidate) -> Pose<f64> {
        let p = self.cell_center(c.col, c.row);
        Pose::new(p.x, p.y, orientation_angle(c.orientation, self.gen.params.orientations))
    }

    fn footprint(&self, c: &Candidate) -> Result<&Footprint> {
        self.gen.table.get(c.shape_id, c.size_index, c.orientation).ok_or(Error::IndexOutOfRange {
            what: "footprint",
            index: self.gen.table.index(c.shape_id, c.size_index, c.orientation),
            len: self.gen.table.len(),
        })
    }

    /// Whether the candidate's cover cells are all free.
    pub fn fits(&self, c: &Candidate) -> bool {
        match self.footprint(c) {
            Ok(fp) => self.grid.fits(self.gen.table.mask(fp.cover), c.col, c.row),
            Err(_) => false,
        }
    }

    /// Free components that are not slivers yet still admit some stone.
    pub fn fillable_components(&self) -> Vec<Vec<usize>> {
        let labels = label_free_cells(self.grid.bits(), self.grid.width, self.grid.height);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); labels.sizes.len()];
        for (i, &l) in labels.labels.iter().enumerate() {
            if l != Labels::OCCUPIED {
                members[l as usize].push(i);
            }
        }
        let mut salvager = self.salvager.borrow_mut();
        members.retain(|m| !salvager.is_sliver(m.len()) && salvager.salvageable(m, self.grid.width));
        members
    }

    /// True when no stone fits anywhere in the free space.
    pub fn saturated(&self) -> bool {
        self.fillable_components().is_empty()
    }

    /// Keeps the candidates that fit and whose stamped placement leaves
    /// every free component salvageable. Order is preserved.
    pub fn filter_candidates(&mut self, proposals: &[Candidate]) -> Vec<Candidate> {
        let mut salvager = self.salvager.borrow_mut();
        let mut check = FillCheck::new(&self.grid, &mut salvager);
        let mut out = Vec::new();
        for c in proposals {
            if !self.fits(c) {
                continue;
            }
            let fp = self.footprint(c).expect("fits implies a valid key");
            let stamp = self.gen.table.mask(fp.stamp);
            if check.admissible(&self.grid, &mut salvager, stamp, c.col, c.row) {
                out.push(*c);
            }
        }
        out
    }

    /// Objective value of a candidate (lower is better).
    pub fn score(&self, c: &Candidate) -> Result<f64> {
        let fp = self.footprint(c)?;
        let pose = self.pose(c);
        let poly = self.gen.catalog.stone_polygon(c.shape_id, c.size_index, &pose)?;
        let ctx = search::ScoreContext::new(self);
        Ok(ctx.class_part(fp) + ctx.position_part(pose.position()) + ctx.unity_part(&poly))
    }

    /// Candidates in rank order: score, then size closeness to the mean
    /// placed size, then radial alignment, then catalog order, then cell.
    pub fn rank_candidates(&self, cands: &[Candidate]) -> Result<Vec<Candidate>> {
        if cands.is_empty() {
            return Err(Error::Precondition("rank_candidates needs at least one candidate".into()));
        }
        let ctx = search::ScoreContext::new(self);
        let mut keyed = cands
            .iter()
            .map(|c| {
                let fp = self.footprint(c)?;
                let pose = self.pose(c);
                let poly = self.gen.catalog.stone_polygon(c.shape_id, c.size_index, &pose)?;
                let score = ctx.class_part(fp) + ctx.position_part(pose.position()) + ctx.unity_part(&poly);
                Ok((ctx.rank_key(score, fp, c.col, c.row, pose.position()), *c))
            })
            .collect::<Result<Vec<_>>>()?;
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(keyed.into_iter().map(|(_, c)| c).collect())
    }

    /// Round stones draw the same disc at every orientation; they take the
    /// one most aligned with the radial direction at their cell.
    pub fn canonical(&self, c: &Candidate) -> Candidate {
        match self.gen.catalog.shapes.get(c.shape_id) {
            Some(s) if s.kind == ShapeKind::Round => {
                Candidate { orientation: search::radial_orientation(self, self.cell_center(c.col, c.row)), ..*c }
            }
            _ => *c,
        }
    }

    /// Best candidate the search finds at one relaxation tier, without placing it.
    pub fn best_candidate(&self, tier: Tier) -> Option<Candidate> {
        match tier {
            Tier::First => search::first_stone(self),
            t => search::best(self, t, self.placements.len() as u64),
        }
    }

    /// Places the next stone or reports why the run is finished.
    pub fn place_next(&mut self) -> Result<Step> {
        if let Some(r) = self.done {
            return Ok(Step::Done(r));
        }
        let params = &self.gen.params;
        if self.placements.len() >= params.max_stones {
            return Ok(self.finish(DoneReason::MaxStones));
        }
        // the threshold only ends a run whose leftover space is already unfillable
        if self.free_fraction() < params.stop_free_fraction && self.saturated() {
            return Ok(self.finish(DoneReason::FreeFraction));
        }
        let kind = self.gen.catalog.kinds[self.rng.gen_range(0..self.gen.catalog.kinds.len())].kind_id;
        let step = self.placements.len() as u64;
        let found = if self.placements.is_empty() {
            search::first_stone(self).map(|c| (c, Tier::First))
        } else {
            [Tier::Snug, Tier::Full, Tier::Saturate]
                .into_iter()
                .find_map(|t| search::best(self, t, step).map(|c| (c, t)))
        };
        let Some((mut cand, tier)) = found else {
            return Ok(self.finish(DoneReason::Exhausted));
        };
        cand.kind_id = kind;
        if tier == Tier::Saturate {
            log::debug!("seed {}: step {step} placed with the fill filter waived", self.seed);
        }
        self.place(&cand, tier).map(Step::Placed)
    }

    fn finish(&mut self, r: DoneReason) -> Step {
        self.done = Some(r);
        Step::Done(r)
    }

    /// Stamps a candidate unconditionally (callers check feasibility).
    fn place(&mut self, c: &Candidate, tier: Tier) -> Result<Placement> {
        let fp = self.footprint(c)?.clone();
        let pose = self.pose(c);
        let poly = self.gen.catalog.stone_polygon(c.shape_id, c.size_index, &pose)?;
        let stamp = self.gen.table.mask(fp.stamp).clone();
        self.grid.stamp(&stamp, c.col, c.row);
        let centroid = poly.centroid();
        self.stats.push(c.shape_id, fp.size_mm, poly.area(), centroid, fp.canonical);
        self.neighbors.push(poly.clone());
        self.stones.push(Stone {
            shape_id: c.shape_id,
            shape: self.gen.catalog.shapes[c.shape_id].kind,
            kind_id: c.kind_id,
            size_mm: fp.size_mm,
            theta: pose.theta,
            polygon: poly,
        });
        let placement = Placement {
            kind_id: c.kind_id,
            shape_id: c.shape_id,
            size_index: c.size_index,
            x: pose.x,
            y: pose.y,
            theta: pose.theta,
        };
        self.placements.push(placement.clone());
        self.tiers.push(tier);
        Ok(placement)
    }

    /// Places a specific candidate, bypassing ranking. Fails if it does not fit.
    pub fn place_candidate(&mut self, c: &Candidate) -> Result<Placement> {
        if !self.fits(c) {
            return Err(Error::Precondition("candidate does not fit the current grid".into()));
        }
        self.place(c, Tier::Full)
    }
}

/// Generates one design with a fresh generator.
pub fn generate(container: &ContainerSpec, catalog: &Catalog<f64>, params: &GenParams, design_id: &str) -> Result<Design> {
    Generator::new(catalog.clone(), params.clone())?.generate(container, design_id, params.seed)
}
