//! Synthetic annotators: judge j likes design d with probability
//! sigmoid(a_j − b·‖z(d)‖₁ + ε), z being the corpus-standardized features.
#![allow(dead_code)]

use gemset::design::Design;
use gemset::features::feature_vector;
use gemset::gbt::sigmoid;
use gemset::generator::{GenParams, Generator};
use gemset::labels::LabelRecord;
use gemset::{Catalog, ContainerSpec, FeatureParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const SLOPE: f64 = 1.0;
pub const NOISE_SD: f64 = 0.5;
pub const OFFSET_SPREAD: f64 = 1.0;

/// Valid designs in a circle, seeds `first..first + n`.
pub fn corpus(diameter_mm: f64, first: u64, n: usize) -> Vec<Design> {
    let g = Generator::new(Catalog::builtin(), GenParams::default()).unwrap();
    let spec = ContainerSpec::Circle { diameter_mm };
    (first..first + n as u64).map(|s| g.generate(&spec, &format!("d-{s:04}"), s).unwrap()).collect()
}

pub fn feature_rows(designs: &[Design]) -> Vec<[f64; 6]> {
    let cat = Catalog::builtin();
    let p = FeatureParams::default();
    designs.iter().map(|d| feature_vector(&d.layout(&cat).unwrap(), &p).unwrap().to_array()).collect()
}

/// L1 norm of each row after standardizing every column (population sd).
pub fn z_norms(rows: &[[f64; 6]]) -> Vec<f64> {
    let n = rows.len() as f64;
    let mut mean = [0.0; 6];
    let mut sd = [0.0; 6];
    for k in 0..6 {
        mean[k] = rows.iter().map(|r| r[k]).sum::<f64>() / n;
        sd[k] = (rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n).sqrt();
    }
    rows.iter()
        .map(|r| (0..6).map(|k| if sd[k] > 0.0 { ((r[k] - mean[k]) / sd[k]).abs() } else { 0.0 }).sum())
        .collect()
}

pub struct Panel {
    pub offsets: Vec<f64>,
}

impl Panel {
    /// Offsets center on the median norm, so a typical judge likes about half.
    pub fn new(judges: usize, norms: &[f64], seed: u64) -> Panel {
        let mut sorted = norms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let center = SLOPE * sorted[sorted.len() / 2];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Panel { offsets: (0..judges).map(|_| center + rng.gen_range(-OFFSET_SPREAD..OFFSET_SPREAD)).collect() }
    }

    pub fn judge_id(j: usize) -> String {
        format!("j-{:02}", j + 1)
    }

    /// One label per (design, judge), designs outer, judges inner.
    pub fn label(&self, ids: &[String], norms: &[f64], judges: &[usize], seed: u64) -> Vec<LabelRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, NOISE_SD).unwrap();
        let mut out = Vec::new();
        for (id, &z) in ids.iter().zip(norms) {
            for &j in judges {
                let p = sigmoid(self.offsets[j] - SLOPE * z + noise.sample(&mut rng));
                let liked = rng.gen::<f64>() < p;
                out.push(LabelRecord {
                    design_id: id.clone(),
                    judge_id: Panel::judge_id(j),
                    label: liked as u8,
                    ts: "2024-01-01T00:00:00Z".into(),
                });
            }
        }
        out
    }
}
