//! Like-coverage statistics over a designs × judges label matrix.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::labels::{latest, LabelRecord};

/// Rows are designs, columns judges; `None` marks a missing label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    pub design_ids: Vec<String>,
    pub judge_ids: Vec<String>,
    cells: Vec<Option<bool>>,
}

impl LabelMatrix {
    pub fn new(design_ids: Vec<String>, judge_ids: Vec<String>, cells: Vec<Option<bool>>) -> Result<LabelMatrix> {
        if design_ids.is_empty() || judge_ids.is_empty() {
            return Err(Error::validation("labels", "matrix needs at least one design and one judge"));
        }
        if cells.len() != design_ids.len() * judge_ids.len() {
            return Err(Error::validation("labels", "cell count does not match the matrix shape"));
        }
        Ok(LabelMatrix { design_ids, judge_ids, cells })
    }

    /// Unnamed matrix from rows of cells.
    pub fn from_rows(rows: &[Vec<Option<bool>>]) -> Result<LabelMatrix> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::validation("labels", "rows differ in length"));
        }
        LabelMatrix::new(
            (0..rows.len()).map(|i| format!("d-{i:04}")).collect(),
            (0..cols).map(|j| format!("j-{j:02}")).collect(),
            rows.concat(),
        )
    }

    /// Builds the matrix from label records (last record per pair wins).
    /// `designs` fixes the row set and order; otherwise rows are the
    /// labeled designs, sorted.
    pub fn from_records(records: &[LabelRecord], designs: Option<&[String]>) -> Result<LabelMatrix> {
        let last = latest(records);
        let judges: Vec<String> = last.keys().map(|(_, j)| j.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let design_ids: Vec<String> = match designs {
            Some(d) => d.to_vec(),
            None => last.keys().map(|(d, _)| d.clone()).collect::<BTreeSet<_>>().into_iter().collect(),
        };
        let mut cells = Vec::with_capacity(design_ids.len() * judges.len());
        for d in &design_ids {
            for j in &judges {
                cells.push(last.get(&(d.clone(), j.clone())).copied());
            }
        }
        LabelMatrix::new(design_ids, judges, cells)
    }

    pub fn rows(&self) -> usize {
        self.design_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.judge_ids.len()
    }

    pub fn get(&self, design: usize, judge: usize) -> Option<bool> {
        self.cells[design * self.cols() + judge]
    }

    pub fn row(&self, design: usize) -> &[Option<bool>] {
        let c = self.cols();
        &self.cells[design * c..(design + 1) * c]
    }

    /// `(likes, non-missing)` per design.
    pub fn tallies(&self) -> Vec<(usize, usize)> {
        (0..self.rows())
            .map(|i| {
                let row = self.row(i);
                (row.iter().filter(|c| **c == Some(true)).count(), row.iter().filter(|c| c.is_some()).count())
            })
            .collect()
    }

    /// Keeps the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<LabelMatrix> {
        let mut cells = Vec::with_capacity(rows.len() * self.cols());
        let mut ids = Vec::with_capacity(rows.len());
        for &r in rows {
            if r >= self.rows() {
                return Err(Error::IndexOutOfRange { what: "design row", index: r, len: self.rows() });
            }
            cells.extend_from_slice(self.row(r));
            ids.push(self.design_ids[r].clone());
        }
        LabelMatrix::new(ids, self.judge_ids.clone(), cells)
    }
}

/// Tallies of the designs with at least one label.
fn rated(m: &LabelMatrix) -> Result<Vec<(usize, usize)>> {
    let t: Vec<(usize, usize)> = m.tallies().into_iter().filter(|&(_, n)| n > 0).collect();
    if t.is_empty() {
        return Err(Error::UndefinedMetric("every label is missing".into()));
    }
    Ok(t)
}

/// Fraction of labeled designs whose like rate is at least `p`.
pub fn like_coverage(m: &LabelMatrix, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::validation("p", format!("must be in (0, 1], got {p}")));
    }
    let t = rated(m)?;
    let hit = t.iter().filter(|&&(likes, n)| likes as f64 / n as f64 >= p).count();
    Ok(hit as f64 / t.len() as f64)
}

/// Number of designs liked by at least `k`% of their judges.
fn coverage_at_percent(t: &[(usize, usize)], k: usize) -> usize {
    t.iter().filter(|&&(likes, n)| likes * 100 >= k * n).count()
}

/// Largest `q` on the 0.01 grid with `like_coverage(q) ≥ q`; 0 when none.
pub fn symmetric_like_point(m: &LabelMatrix) -> Result<f64> {
    let t = rated(m)?;
    let total = t.len();
    let k = (1..=100usize).rev().find(|&k| coverage_at_percent(&t, k) * 100 >= k * total).unwrap_or(0);
    Ok(k as f64 / 100.0)
}
