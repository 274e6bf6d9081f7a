use std::collections::{BTreeMap, BTreeSet};

use expertise::eval::{
    evaluate_feature, export_distributions, predictability_heatmap, supertopic_rollup, value_histogram, GRID,
};
use expertise::features::FeatureStore;
use expertise::groundtruth::{Label, PairLabel};
use expertise::normalize::{normalize_store, NormalizedFeatureStore};
use expertise::ontology::{Level, TopicNode, TopicOntology};
use expertise::FeatureId;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn f0() -> FeatureId {
    FeatureId::from_index(0).unwrap()
}

fn label(u1: &str, u2: &str, topic: &str, up: bool) -> PairLabel {
    PairLabel {
        u1: u1.into(),
        u2: u2.into(),
        topic: topic.into(),
        label: if up { Label::Up } else { Label::Down },
        evaluator: "e".into(),
    }
}

fn random_case(seed: u64) -> (Vec<PairLabel>, NormalizedFeatureStore) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = FeatureStore::new();
    for u in 0..20 {
        for t in 0..2 {
            if rng.random_bool(0.5) {
                raw.set(&format!("u{u}"), &format!("t{t}"), f0(), rng.random_range(1..100) as f64);
            }
        }
    }
    let labels = (0..rng.random_range(0..80))
        .filter_map(|_| {
            let (a, b) = (rng.random_range(0..20), rng.random_range(0..20));
            (a != b).then(|| label(&format!("u{a}"), &format!("u{b}"), &format!("t{}", rng.random_range(0..2)), rng.random_bool(0.5)))
        })
        .collect();
    (labels, normalize_store(&raw))
}

#[test]
fn metrics_example_and_degenerate_cases() {
    let mut raw = FeatureStore::new();
    raw.set("a", "t", f0(), 1.0);
    let norm = normalize_store(&raw);
    let none = evaluate_feature(f0(), &[label("b", "c", "t", true)], &norm, 3);
    assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
    let empty = evaluate_feature(f0(), &[], &norm, 3);
    assert!(empty.empty);
}

#[test]
fn heatmap_cell_example() {
    let mut store = FeatureStore::new();
    store.set("a", "t", f0(), 0.4);
    let norm = NormalizedFeatureStore::from_store(store).unwrap();
    let conn = BTreeMap::from([("a".to_string(), 1e3), ("b".to_string(), 1e5)]);
    let grid = predictability_heatmap(f0(), &[label("a", "b", "t", true)], &norm, &conn);
    for i in 0..GRID {
        for j in 0..GRID {
            let want = if (i, j) == (3, 5) { 0.4 } else { 0.0 };
            assert!((grid.values[i][j] - want).abs() < 1e-15);
        }
    }
    let wrong = predictability_heatmap(f0(), &[label("a", "b", "t", false)], &norm, &conn);
    assert!(wrong.values.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn heatmap_recovers_planted_connectivity_effect() {
    // u1 sits in bucket i, u2 in bucket j. The feature delta magnitude is
    // 0.05 + 0.1·|i − j|, and the prediction is correct with probability
    // rising in |i − j|.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut store = FeatureStore::new();
    let mut conn = BTreeMap::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for i in 0..GRID {
        for j in 0..GRID {
            let gap = i.abs_diff(j) as f64;
            for _ in 0..40 {
                let (a, b) = (format!("a{n}"), format!("b{n}"));
                n += 1;
                store.set(&a, "t", f0(), 0.05 + 0.1 * gap);
                conn.insert(a.clone(), 10f64.powi(i as i32) * 1.5);
                conn.insert(b.clone(), 10f64.powi(j as i32) * 1.5);
                labels.push(label(&a, &b, "t", rng.random_bool(0.55 + 0.05 * gap)));
            }
        }
    }
    let norm = NormalizedFeatureStore::from_store(store).unwrap();
    let grid = predictability_heatmap(f0(), &labels, &norm, &conn);
    let (mut near, mut far) = (Vec::new(), Vec::new());
    for i in 0..GRID {
        for j in 0..GRID {
            let gap = i.abs_diff(j);
            assert!(grid.counts[i][j] > 0);
            assert!((grid.values[i][j] - (0.05 + 0.1 * gap as f64)).abs() < 1e-12);
            let weight = grid.values[i][j] * grid.counts[i][j] as f64;
            if gap <= 1 {
                near.push(weight);
            } else if gap >= 4 {
                far.push(weight);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&far) > mean(&near));
}

#[test]
fn distributions_of_single_value_and_empty_store() {
    let mut raw = FeatureStore::new();
    raw.set("a", "t", f0(), 3.0);
    let reports = export_distributions(&raw, &normalize_store(&raw), &BTreeMap::new(), &[]);
    let rows: Vec<&str> = reports.value_histogram.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let cols: Vec<f64> = rows[0].split('\t').skip(1).map(|c| c.parse().unwrap()).collect();
    assert!(cols[0] <= 3.0 && 3.0 < cols[1] && cols[2] == 1.0);

    let empty = FeatureStore::new();
    let reports = export_distributions(&empty, &normalize_store(&empty), &BTreeMap::new(), &[]);
    for (_, body) in reports.files() {
        assert_eq!(body.lines().count(), 1);
    }
}

#[test]
fn power_law_slope_recovered() {
    let alpha = 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut raw = FeatureStore::new();
    for u in 0..200_000 {
        let x: f64 = rng.random_range(0.0..1.0);
        raw.set(&format!("u{u}"), "t", f0(), (1.0 - x).powf(-1.0 / (alpha - 1.0)));
    }
    let reports = export_distributions(&raw, &normalize_store(&raw), &BTreeMap::new(), &[]);
    let mut pts = Vec::new();
    for line in reports.value_histogram.lines().skip(1) {
        let c: Vec<&str> = line.split('\t').collect();
        let (lo, hi, n, d): (f64, f64, f64, f64) =
            (c[1].parse().unwrap(), c[2].parse().unwrap(), c[3].parse().unwrap(), c[4].parse().unwrap());
        if n >= 50.0 {
            pts.push(((lo * hi).sqrt().log10(), d.log10()));
        }
    }
    assert!(pts.len() >= 8);
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / k, sy / k);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + alpha).abs() <= 0.15, "slope {slope}");
    // Same answer from the in-memory histogram.
    assert_eq!(value_histogram(raw.iter().map(|e| e.3)).len(), reports.value_histogram.lines().count() - 1);
}

fn super_ontology(n: usize) -> TopicOntology {
    let mut nodes = Vec::new();
    for s in 0..n {
        nodes.push(TopicNode { id: format!("S{s}"), slug: format!("super{s}"), display_name: String::new(), level: Level::Super, parent_id: None });
        nodes.push(TopicNode { id: format!("B{s}"), slug: format!("sub{s}"), display_name: String::new(), level: Level::Sub, parent_id: Some(format!("S{s}")) });
    }
    TopicOntology::new(nodes).unwrap()
}

#[test]
fn rollup_examples() {
    let ont = super_ontology(2);
    let users: BTreeSet<String> = ["a", "b"].map(String::from).into();
    let one = BTreeMap::from([(("a".to_string(), "B0".to_string()), 1.0), (("a".to_string(), "S0".to_string()), 0.5)]);
    let col = supertopic_rollup("X", &one, &users, &ont);
    assert_eq!(col.percentages()["super0"], 100.0);
    assert_eq!(col.excluded, 1);
    let two = BTreeMap::from([(("a".to_string(), "B0".to_string()), 1.0), (("b".to_string(), "B1".to_string()), 1.0)]);
    let pct = supertopic_rollup("X", &two, &users, &ont).percentages();
    assert_eq!((pct["super0"], pct["super1"]), (50.0, 50.0));
}

#[test]
fn rollup_recovers_planted_skew_ranking() {
    let ont = super_ontology(4);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let planted: [(&str, [f64; 4]); 3] = [
        ("A", [0.4, 0.3, 0.2, 0.1]),
        ("B", [0.1, 0.2, 0.3, 0.4]),
        ("C", [0.15, 0.45, 0.1, 0.3]),
    ];
    let users: BTreeSet<String> = (0..3000).map(|u| format!("u{u}")).collect();
    for (name, probs) in planted {
        let mut scores = BTreeMap::new();
        for u in &users {
            // Each user has a dominant super topic drawn from the planted
            // distribution plus weaker noise on the others.
            let x: f64 = rng.random_range(0.0..1.0);
            let mut acc = 0.0;
            let dominant = probs.iter().position(|p| { acc += p; x < acc }).unwrap_or(3);
            for s in 0..4 {
                let base = if s == dominant { 1.0 } else { rng.random_range(0.0..0.5) };
                scores.insert((u.clone(), format!("B{s}")), base);
            }
        }
        let col = supertopic_rollup(name, &scores, &users, &ont);
        let pct = col.percentages();
        let mut recovered: Vec<usize> = (0..4).collect();
        recovered.sort_by(|&a, &b| pct[&format!("super{b}")].total_cmp(&pct[&format!("super{a}")]));
        let mut expected: Vec<usize> = (0..4).collect();
        expected.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
        assert_eq!(recovered, expected, "{name}: {pct:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn precision_at_least_recall(seed in any::<u64>()) {
        let (labels, norm) = random_case(seed);
        let m = evaluate_feature(f0(), &labels, &norm, 20);
        prop_assert!(m.predicted <= m.total);
        prop_assert!(m.precision >= m.recall);
        if m.precision + m.recall > 0.0 {
            prop_assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-12);
        }
    }

    #[test]
    fn relabeling_users_keeps_metrics(seed in any::<u64>()) {
        let (labels, norm) = random_case(seed);
        let rename = |u: &str| format!("z{}", u.chars().rev().collect::<String>());
        let mut renamed = FeatureStore::new();
        for (u, t, f, v) in norm.store().iter() {
            renamed.set(&rename(u), t, f, v);
        }
        let renamed = NormalizedFeatureStore::from_store(renamed).unwrap();
        let relabeled: Vec<PairLabel> = labels.iter().map(|l| PairLabel { u1: rename(&l.u1), u2: rename(&l.u2), ..l.clone() }).collect();
        let a = evaluate_feature(f0(), &labels, &norm, 20);
        let b = evaluate_feature(f0(), &relabeled, &renamed, 20);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn swapping_pairs_transposes_heatmap(seed in any::<u64>()) {
        let (labels, norm) = random_case(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let conn: BTreeMap<String, f64> = (0..20).map(|u| (format!("u{u}"), 10f64.powf(rng.random_range(0.0..9.0)))).collect();
        let swapped: Vec<PairLabel> = labels.iter().map(PairLabel::swapped).collect();
        let a = predictability_heatmap(f0(), &labels, &norm, &conn);
        let b = predictability_heatmap(f0(), &swapped, &norm, &conn);
        prop_assert_eq!(a.transposed(), b);
    }
}
