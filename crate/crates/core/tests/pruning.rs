use gemset::gbt::{self, TrainConfig};
use gemset::generator::{GenParams, Generator};
use gemset::labels::LabelRecord;
use gemset::pruning::{aggregate_labels, prune, prune_scores, training_set, Aggregation, PruneMode};
use gemset::{Catalog, ContainerSpec, Design, Error, FeatureParams, Placement};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rec(d: &str, j: &str, label: u8) -> LabelRecord {
    LabelRecord { design_id: d.into(), judge_id: j.into(), label, ts: "2024-05-01T12:00:00Z".into() }
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("d-{i:04}")).collect()
}

#[test]
fn majority_needs_strictly_more_likes() {
    let r = vec![rec("a", "1", 1), rec("a", "2", 1), rec("a", "3", 0), rec("b", "1", 1), rec("b", "2", 0)];
    let m = aggregate_labels(&r, Aggregation::Majority);
    assert!(m["a"]);
    assert!(!m["b"], "a tie is not a majority");
    assert!(aggregate_labels(&r, Aggregation::Any)["b"]);
    assert!(!aggregate_labels(&r, Aggregation::All)["a"]);
    assert_eq!("all".parse::<Aggregation>().unwrap(), Aggregation::All);
    assert!("most".parse::<Aggregation>().is_err());
}

#[test]
fn aggregation_matches_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let judges = rng.gen_range(1..7);
        let mut records = Vec::new();
        let mut truth = Vec::new();
        for d in 0..10 {
            let mut likes = 0;
            for j in 0..judges {
                // an overridden label first, to exercise last-wins
                records.push(rec(&format!("d{d}"), &format!("j{j}"), rng.gen_range(0..2)));
                let l = rng.gen_range(0..2);
                records.push(rec(&format!("d{d}"), &format!("j{j}"), l));
                likes += l as usize;
            }
            truth.push((likes, judges));
        }
        for scheme in [Aggregation::Majority, Aggregation::Any, Aggregation::All] {
            let m = aggregate_labels(&records, scheme);
            for (d, &(likes, n)) in truth.iter().enumerate() {
                let expect = match scheme {
                    Aggregation::Majority => likes * 2 > n,
                    Aggregation::Any => likes >= 1,
                    Aggregation::All => likes == n,
                };
                assert_eq!(m[&format!("d{d}")], expect);
            }
        }
    }
}

#[test]
fn thresholds_at_the_extremes() {
    let scores: Vec<_> = [0.0, 0.3, 1.0].into_iter().map(Ok).collect();
    assert_eq!(prune_scores(&ids(3), &scores, PruneMode::Threshold(0.0)).unwrap().kept.len(), 3);
    let none = prune_scores(&ids(3), &scores, PruneMode::Threshold(1.01)).unwrap();
    assert!(none.kept.is_empty());
    assert!(none.discarded.iter().all(|d| d.reason == "below-threshold"));
}

#[test]
fn keep_fraction_breaks_ties_by_id() {
    let scores: Vec<_> = [0.5, 0.9, 0.5, 0.5, 0.1].into_iter().map(Ok).collect();
    let m = prune_scores(&ids(5), &scores, PruneMode::KeepFraction(0.4)).unwrap();
    assert_eq!(m.kept, vec!["d-0000", "d-0001"]);
    let m = prune_scores(&ids(5), &scores, PruneMode::KeepFraction(0.7)).unwrap();
    assert_eq!(m.kept, vec!["d-0000", "d-0001", "d-0002", "d-0003"], "round(3.5) = 4");
    assert!(prune_scores(&ids(5), &scores, PruneMode::KeepFraction(1.5)).is_err());
}

#[test]
fn unscorable_designs_are_discarded_with_a_reason() {
    let c = Catalog::builtin();
    let lone = Design {
        design_id: "d-0000".into(),
        seed: 0,
        params_fingerprint: String::new(),
        container: ContainerSpec::Circle { diameter_mm: 10.0 },
        placements: vec![Placement { kind_id: 0, shape_id: 0, size_index: 0, x: 0.0, y: 0.0, theta: 0.0 }],
    };
    let model = gemset::gbt::GbtModel::constant(gemset::gbt::Loss::Logistic, 0.0);
    let m = prune(&[lone], &c, &FeatureParams::default(), &model, PruneMode::Threshold(0.0)).unwrap();
    assert!(m.kept.is_empty());
    assert_eq!(m.discarded[0].score, None);
    assert!(m.discarded[0].reason.starts_with("features-unavailable"));
    let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
    assert_eq!(v["threshold"], 0.0);
    assert!(v["discarded"][0]["score"].is_null());
}

#[test]
fn pruning_keeps_what_planted_judges_like() {
    let c = Catalog::builtin();
    let g = Generator::new(c.clone(), GenParams::default()).unwrap();
    let designs: Vec<Design> = (0..60)
        .map(|s| g.generate(&ContainerSpec::Ellipse { width_mm: 18.0, height_mm: 26.0 }, &format!("d-{s:04}"), s).unwrap())
        .collect();
    let fp = FeatureParams::default();
    // judges like low proportion (uniform sizes)
    let rows = gemset::pruning::feature_rows(&designs, &c, &fp);
    let props: Vec<f64> = rows.iter().map(|r| r.as_ref().unwrap()[4]).collect();
    let rate = |p: f64, med: f64| if p < med { 0.9 } else { 0.1 };
    let mut sorted = props.clone();
    sorted.sort_by(f64::total_cmp);
    let med = sorted[30];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut records = Vec::new();
    for (d, &p) in designs.iter().zip(&props) {
        for j in 0..3 {
            records.push(rec(&d.design_id, &format!("j-{j}"), rng.gen_bool(rate(p, med)) as u8));
        }
    }
    let set = training_set(&designs[..40], &records, Aggregation::Majority, &c, &fp);
    assert_eq!(set.x.len(), 40);
    let model = gbt::train(&set.x, &set.y, &TrainConfig { min_samples_leaf: 3, ..TrainConfig::default() }).unwrap();
    let rest = &designs[40..];
    let m = prune(rest, &c, &fp, &model, PruneMode::KeepFraction(0.5)).unwrap();
    let liked = |id: &String| {
        let i: usize = id[2..].parse().unwrap();
        rate(props[i], med)
    };
    let kept: f64 = m.kept.iter().map(liked).sum::<f64>() / m.kept.len() as f64;
    let gone: f64 = m.discarded.iter().map(|d| liked(&d.id)).sum::<f64>() / m.discarded.len() as f64;
    assert!(kept > gone, "kept {kept} vs discarded {gone}");
}

proptest! {
    #[test]
    fn pruning_partitions_and_is_monotone(raw in prop::collection::vec(prop::option::of(0.0..1.0f64), 1..40), t1 in 0.0..1.0f64, t2 in 0.0..1.0f64, q in 0.0..=1.0f64) {
        let scores: Vec<Result<f64, Error>> = raw.iter().map(|s| s.ok_or(Error::UndefinedFeature("x".into()))).collect();
        let ids = ids(raw.len());
        for mode in [PruneMode::Threshold(t1), PruneMode::KeepFraction(q)] {
            let m = prune_scores(&ids, &scores, mode).unwrap();
            let mut all: Vec<String> = m.kept.iter().cloned().chain(m.discarded.iter().map(|d| d.id.clone())).collect();
            all.sort();
            prop_assert_eq!(&all, &ids);
            prop_assert_eq!(m.kept.len() + m.discarded.len(), ids.len());
        }
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let a = prune_scores(&ids, &scores, PruneMode::Threshold(lo)).unwrap();
        let b = prune_scores(&ids, &scores, PruneMode::Threshold(hi)).unwrap();
        prop_assert!(b.kept.iter().all(|k| a.kept.contains(k)));
    }
}
