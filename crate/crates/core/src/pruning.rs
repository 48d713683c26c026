//! Label aggregation, training-set assembly and model-based pruning.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::design::Design;
use crate::error::{Error, Result};
use crate::features::{feature_vector, FeatureParams};
use crate::gbt::GbtModel;
use crate::labels::{latest, LabelRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// More likes than dislikes; ties count as dislike.
    #[default]
    Majority,
    Any,
    All,
}

impl Aggregation {
    pub fn decide(self, likes: usize, total: usize) -> bool {
        match self {
            Aggregation::Majority => 2 * likes > total,
            Aggregation::Any => likes > 0,
            Aggregation::All => total > 0 && likes == total,
        }
    }
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "majority" => Ok(Aggregation::Majority),
            "any" => Ok(Aggregation::Any),
            "all" => Ok(Aggregation::All),
            other => Err(Error::validation("aggregation", format!("expected majority, any or all, got {other}"))),
        }
    }
}

/// One binary target per labeled design, using each judge's last label.
pub fn aggregate_labels(records: &[LabelRecord], scheme: Aggregation) -> BTreeMap<String, bool> {
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for ((design, _), liked) in latest(records) {
        let t = tally.entry(design).or_default();
        t.0 += liked as usize;
        t.1 += 1;
    }
    tally.into_iter().map(|(d, (likes, total))| (d, scheme.decide(likes, total))).collect()
}

/// Feature rows for each design, in input order.
pub fn feature_rows(designs: &[Design], catalog: &Catalog<f64>, params: &FeatureParams<f64>) -> Vec<Result<Vec<f64>>> {
    designs
        .par_iter()
        .map(|d| {
            let layout = d.layout(catalog)?;
            Ok(feature_vector(&layout, params)?.to_array().to_vec())
        })
        .collect()
}

/// Training rows: designs with at least one label and computable features.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub design_ids: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

pub fn training_set(
    designs: &[Design],
    records: &[LabelRecord],
    scheme: Aggregation,
    catalog: &Catalog<f64>,
    params: &FeatureParams<f64>,
) -> TrainingSet {
    let targets = aggregate_labels(records, scheme);
    let rows = feature_rows(designs, catalog, params);
    let mut set = TrainingSet { design_ids: Vec::new(), x: Vec::new(), y: Vec::new() };
    for (d, row) in designs.iter().zip(rows) {
        let Some(&t) = targets.get(&d.design_id) else {
            log::warn!("{}: no labels, skipped", d.design_id);
            continue;
        };
        match row {
            Ok(x) => {
                set.design_ids.push(d.design_id.clone());
                set.x.push(x);
                set.y.push(if t { 1.0 } else { 0.0 });
            }
            Err(e) => log::warn!("{}: features unavailable, skipped: {e}", d.design_id),
        }
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PruneMode {
    /// Keep designs scoring at least this probability.
    Threshold(f64),
    /// Keep the top fraction by score, ties broken by design id.
    KeepFraction(f64),
}

impl PruneMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PruneMode::Threshold(t) if t.is_nan() => Err(Error::validation("threshold", "must be a number")),
            PruneMode::KeepFraction(q) if !(0.0..=1.0).contains(&q) => {
                Err(Error::validation("keep_fraction", format!("must be in [0, 1], got {q}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discarded {
    pub id: String,
    pub score: Option<f64>,
    pub reason: String,
}

/// Outcome of pruning; serializes as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kept: Vec<String>,
    pub discarded: Vec<Discarded>,
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keep_fraction: Option<f64>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Model scores per design; `Err` where features cannot be computed.
pub fn score_designs(designs: &[Design], catalog: &Catalog<f64>, params: &FeatureParams<f64>, model: &GbtModel) -> Vec<Result<f64>> {
    feature_rows(designs, catalog, params).into_iter().map(|r| r.map(|x| model.predict(&x))).collect()
}

/// Splits designs into kept and discarded. Both lists follow input order.
pub fn prune(
    designs: &[Design],
    catalog: &Catalog<f64>,
    params: &FeatureParams<f64>,
    model: &GbtModel,
    mode: PruneMode,
) -> Result<Manifest> {
    let scores = score_designs(designs, catalog, params, model);
    let ids: Vec<String> = designs.iter().map(|d| d.design_id.clone()).collect();
    prune_scores(&ids, &scores, mode)
}

/// Pruning on precomputed scores.
pub fn prune_scores(ids: &[String], scores: &[Result<f64>], mode: PruneMode) -> Result<Manifest> {
    mode.validate()?;
    if ids.len() != scores.len() {
        return Err(Error::validation("scores", "one score per design required"));
    }
    let keep: Vec<bool> = match mode {
        PruneMode::Threshold(t) => scores.iter().map(|s| s.as_ref().is_ok_and(|&s| s >= t)).collect(),
        PruneMode::KeepFraction(q) => {
            let mut ranked: Vec<(f64, usize)> =
                scores.iter().enumerate().filter_map(|(i, s)| s.as_ref().ok().map(|&s| (s, i))).collect();
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| ids[a.1].cmp(&ids[b.1])));
            let n = (q * ranked.len() as f64).round() as usize;
            let mut keep = vec![false; ids.len()];
            for &(_, i) in &ranked[..n] {
                keep[i] = true;
            }
            keep
        }
    };
    let mut m = Manifest {
        kept: Vec::new(),
        discarded: Vec::new(),
        threshold: match mode {
            PruneMode::Threshold(t) => Some(t),
            PruneMode::KeepFraction(_) => None,
        },
        keep_fraction: match mode {
            PruneMode::KeepFraction(q) => Some(q),
            PruneMode::Threshold(_) => None,
        },
    };
    for (i, id) in ids.iter().enumerate() {
        if keep[i] {
            m.kept.push(id.clone());
            continue;
        }
        let (score, reason) = match &scores[i] {
            Ok(s) => (
                Some(*s),
                match mode {
                    PruneMode::Threshold(_) => "below-threshold".to_string(),
                    PruneMode::KeepFraction(_) => "below-keep-fraction".to_string(),
                },
            ),
            Err(e) => (None, format!("features-unavailable: {e}")),
        };
        m.discarded.push(Discarded { id: id.clone(), score, reason });
    }
    Ok(m)
}
