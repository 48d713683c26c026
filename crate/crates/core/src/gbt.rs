//! Gradient-boosted regression trees with exact greedy splits.
//!
//! Each round fits a depth-limited tree to the negative gradients of the
//! loss (split criterion: squared-error reduction), then sets leaf values
//! by a Newton step (logistic) or the mean residual (squared). Ties in
//! split gain go to the lowest feature index, then the lowest threshold,
//! so training is deterministic.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FEATURE_NAMES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Logistic,
    Squared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { n_trees: 200, max_depth: 3, learning_rate: 0.1, min_samples_leaf: 5, loss: Loss::Logistic }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::validation("n_trees", "must be ≥ 1"));
        }
        if self.max_depth < 1 {
            return Err(Error::validation("max_depth", "must be ≥ 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::validation("learning_rate", "must be in (0, 1]"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::validation("min_samples_leaf", "must be ≥ 1"));
        }
        Ok(())
    }
}

/// Internal nodes send `x[f] <= t` left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split { f: usize, t: f64, l: usize, r: usize },
    Leaf { v: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { v } => return v,
                Node::Split { f, t, l, r } => i = if x[f] <= t { l } else { r },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { l, r, .. } => 1 + go(nodes, l).max(go(nodes, r)),
            }
        }
        go(&self.nodes, 0)
    }

    fn check(&self, width: usize) -> std::result::Result<(), String> {
        if self.nodes.is_empty() {
            return Err("empty tree".into());
        }
        // children must point forward, which also rules out cycles
        for (i, n) in self.nodes.iter().enumerate() {
            match *n {
                Node::Leaf { v } if !v.is_finite() => return Err(format!("node {i}: non-finite leaf")),
                Node::Split { f, t, l, r } => {
                    if f >= width {
                        return Err(format!("node {i}: feature {f} out of range"));
                    }
                    if !t.is_finite() {
                        return Err(format!("node {i}: non-finite threshold"));
                    }
                    if l <= i || r <= i || l >= self.nodes.len() || r >= self.nodes.len() {
                        return Err(format!("node {i}: bad child index"));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub loss: Loss,
    pub learning_rate: f64,
    pub base_score: f64,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl GbtModel {
    /// A model with no trees that always predicts from `base_score`.
    pub fn constant(loss: Loss, base_score: f64) -> GbtModel {
        GbtModel {
            loss,
            learning_rate: 0.1,
            base_score,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            trees: Vec::new(),
        }
    }

    /// Ensemble output before the link function.
    pub fn raw(&self, x: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    /// Probability of a like, in `[0, 1]`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let z = self.raw(x);
        match self.loss {
            Loss::Logistic => sigmoid(z),
            Loss::Squared => z.clamp(0.0, 1.0),
        }
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        xs.par_iter().map(|x| self.predict(x)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<GbtModel> {
        let m: GbtModel = serde_json::from_str(text).map_err(|e| Error::parse("model.json", e))?;
        let width = m.feature_names.len();
        if !(m.learning_rate > 0.0 && m.learning_rate <= 1.0) || !m.base_score.is_finite() {
            return Err(Error::parse("model.json", "learning_rate or base_score out of range"));
        }
        for (k, t) in m.trees.iter().enumerate() {
            t.check(width).map_err(|e| Error::parse("model.json", format!("tree {k}: {e}")))?;
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<GbtModel> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GbtModel::from_json(&text)
    }
}

/// Trains on rows of features and binary (0/1) labels.
pub fn train(x: &[Vec<f64>], y: &[f64], cfg: &TrainConfig) -> Result<GbtModel> {
    train_traced(x, y, cfg).map(|(m, _)| m)
}

/// Like [`train`], also returning the training loss after every round
/// (mean squared error or mean log-loss).
pub fn train_traced(x: &[Vec<f64>], y: &[f64], cfg: &TrainConfig) -> Result<(GbtModel, Vec<f64>)> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(Error::validation("labels", format!("{} rows but {} labels", x.len(), y.len())));
    }
    if x.len() < 2 * cfg.min_samples_leaf || x.is_empty() {
        return Err(Error::validation("rows", format!("need at least {} rows, got {}", (2 * cfg.min_samples_leaf).max(1), x.len())));
    }
    let width = x[0].len();
    if width == 0 || x.iter().any(|r| r.len() != width) {
        return Err(Error::validation("features", "rows must share one nonzero width"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("features", "values must be finite"));
    }
    let n = x.len();
    let base_score = match cfg.loss {
        Loss::Logistic => {
            if y.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::validation("labels", "logistic loss needs 0/1 labels"));
            }
            let pos = y.iter().filter(|&&v| v == 1.0).count();
            if pos == 0 || pos == n {
                return Err(Error::validation("labels", "logistic loss needs both classes"));
            }
            (pos as f64 / (n - pos) as f64).ln()
        }
        Loss::Squared => y.iter().sum::<f64>() / n as f64,
    };
    let feature_names =
        if width == FEATURE_NAMES.len() { FEATURE_NAMES.iter().map(|s| s.to_string()).collect() } else { (0..width).map(|i| format!("f{i}")).collect() };

    // each feature's row order, sorted once
    let order: Vec<Vec<usize>> = (0..width)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut raw = vec![base_score; n];
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut losses = Vec::with_capacity(cfg.n_trees);
    let mut builder = Builder { x, order: &order, cfg, member: vec![false; n] };
    for _ in 0..cfg.n_trees {
        let (resid, hess) = gradients(cfg.loss, &raw, y);
        let all: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::new();
        builder.grow(&all, &resid, &hess, 0, &mut nodes);
        let tree = Tree { nodes };
        for (i, r) in raw.iter_mut().enumerate() {
            *r += cfg.learning_rate * tree.predict(&x[i]);
        }
        trees.push(tree);
        losses.push(loss_value(cfg.loss, &raw, y));
    }
    Ok((GbtModel { loss: cfg.loss, learning_rate: cfg.learning_rate, base_score, feature_names, trees }, losses))
}

/// Negative gradients and hessians at the current raw scores.
fn gradients(loss: Loss, raw: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    match loss {
        Loss::Squared => (raw.iter().zip(y).map(|(f, y)| y - f).collect(), vec![1.0; raw.len()]),
        Loss::Logistic => raw
            .iter()
            .zip(y)
            .map(|(&f, &y)| {
                let p = sigmoid(f);
                (y - p, p * (1.0 - p))
            })
            .unzip(),
    }
}

pub fn loss_value(loss: Loss, raw: &[f64], y: &[f64]) -> f64 {
    let n = raw.len() as f64;
    match loss {
        Loss::Squared => raw.iter().zip(y).map(|(f, y)| (y - f) * (y - f)).sum::<f64>() / n,
        Loss::Logistic => {
            // log(1 + e^f) − y·f, computed stably
            raw.iter().zip(y).map(|(&f, &y)| f.max(0.0) + (-f.abs()).exp().ln_1p() - y * f).sum::<f64>() / n
        }
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    order: &'a [Vec<usize>],
    cfg: &'a TrainConfig,
    member: Vec<bool>,
}

struct Split {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    /// Appends the subtree for `rows` and returns its node index.
    fn grow(&mut self, rows: &[usize], resid: &[f64], hess: &[f64], depth: usize, nodes: &mut Vec<Node>) -> usize {
        let at = nodes.len();
        let split = if depth < self.cfg.max_depth { self.best_split(rows, resid) } else { None };
        let Some(s) = split else {
            nodes.push(Node::Leaf { v: self.leaf_value(rows, resid, hess) });
            return at;
        };
        nodes.push(Node::Leaf { v: 0.0 });
        let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[i][s.feature] <= s.threshold);
        let l = self.grow(&left, resid, hess, depth + 1, nodes);
        let r = self.grow(&right, resid, hess, depth + 1, nodes);
        nodes[at] = Node::Split { f: s.feature, t: s.threshold, l, r };
        at
    }

    fn leaf_value(&self, rows: &[usize], resid: &[f64], hess: &[f64]) -> f64 {
        let g: f64 = rows.iter().map(|&i| resid[i]).sum();
        match self.cfg.loss {
            Loss::Squared => g / rows.len() as f64,
            Loss::Logistic => {
                let h: f64 = rows.iter().map(|&i| hess[i]).sum();
                if h <= f64::MIN_POSITIVE {
                    0.0
                } else {
                    g / h
                }
            }
        }
    }

    /// Exact scan over midpoints of consecutive distinct values.
    fn best_split(&mut self, rows: &[usize], resid: &[f64]) -> Option<Split> {
        let min_leaf = self.cfg.min_samples_leaf;
        let n = rows.len();
        if n < 2 * min_leaf {
            return None;
        }
        for &i in rows {
            self.member[i] = true;
        }
        let total: f64 = rows.iter().map(|&i| resid[i]).sum();
        let parent = total * total / n as f64;
        let mut best: Option<Split> = None;
        let mut sorted = Vec::with_capacity(n);
        for (f, ord) in self.order.iter().enumerate() {
            sorted.clear();
            sorted.extend(ord.iter().copied().filter(|&i| self.member[i]));
            let mut left = 0.0;
            for k in 0..n - 1 {
                left += resid[sorted[k]];
                let (a, b) = (self.x[sorted[k]][f], self.x[sorted[k + 1]][f]);
                let nl = k + 1;
                if a == b || nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let right = total - left;
                let gain = left * left / nl as f64 + right * right / (n - nl) as f64 - parent;
                if gain > 0.0 && best.as_ref().is_none_or(|s| gain > s.gain) {
                    best = Some(Split { gain, feature: f, threshold: midpoint(a, b) });
                }
            }
        }
        for &i in rows {
            self.member[i] = false;
        }
        best
    }
}

/// A threshold `t` with `a <= t < b`.
fn midpoint(a: f64, b: f64) -> f64 {
    let t = a + (b - a) / 2.0;
    if t >= b {
        a
    } else {
        t
    }
}
