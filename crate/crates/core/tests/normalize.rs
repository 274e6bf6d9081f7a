use std::collections::BTreeMap;

use expertise::features::FeatureStore;
use expertise::normalize::{feature_delta, normalize_store, NormalizedFeatureStore};
use expertise::FeatureId;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const E: f64 = std::f64::consts::E;

/// Random sparse store. Values are multiples of 1/1000 spread over several
/// decades, so distinct raw values stay distinct after the log transform.
fn random_store(seed: u64) -> FeatureStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = FeatureStore::new();
    let users = rng.random_range(1..25);
    let topics = rng.random_range(1..4);
    for _ in 0..rng.random_range(1..120) {
        let u = format!("u{}", rng.random_range(0..users));
        let t = format!("t{}", rng.random_range(0..topics));
        let f = FeatureId::from_index(rng.random_range(0..6)).unwrap();
        let v = rng.random_range(1..1_000_000) as f64 / 1000.0;
        store.set(&u, &t, f, v);
    }
    store
}

type Groups = BTreeMap<(usize, String), Vec<(String, f64)>>;

fn groups(store: &FeatureStore) -> Groups {
    let mut out: Groups = BTreeMap::new();
    for (u, t, f, v) in store.iter() {
        out.entry((f.index(), t.clone())).or_default().push((u.clone(), v));
    }
    out
}

fn argmax(values: &[(String, f64)]) -> Vec<&str> {
    let m = values.iter().map(|(_, v)| *v).fold(f64::MIN, f64::max);
    values.iter().filter(|(_, v)| *v == m).map(|(u, _)| u.as_str()).collect()
}

fn check_range_and_argmax(raw: &FeatureStore, norm: &NormalizedFeatureStore) -> Result<(), TestCaseError> {
    let rg = groups(raw);
    let ng = groups(norm.store());
    prop_assert_eq!(rg.len(), ng.len());
    for (key, values) in &ng {
        for (_, v) in values {
            prop_assert!(*v > 0.0 && *v <= 1.0);
        }
        prop_assert!(values.iter().any(|(_, v)| *v == 1.0));
        prop_assert_eq!(argmax(&rg[key]), argmax(values));
    }
    Ok(())
}

#[test]
fn log_scale_examples() {
    let mut raw = FeatureStore::new();
    let f = FeatureId::from_index(0).unwrap();
    raw.set("a", "t", f, E - 1.0);
    raw.set("b", "t", f, E * E - 1.0);
    raw.set("solo", "s", f, 0.25);
    let norm = normalize_store(&raw);
    assert!((norm.get("a", "t", f) - 0.5).abs() < 1e-12);
    assert_eq!(norm.get("b", "t", f), 1.0);
    assert_eq!(norm.get("solo", "s", f), 1.0);
    assert_eq!(norm.get("nobody", "t", f), 0.0);
}

#[test]
fn delta_examples() {
    let mut raw = FeatureStore::new();
    let f = FeatureId::from_index(3).unwrap();
    raw.set("top", "t", f, 99.0);
    raw.set("low", "t", f, 99f64.ln_1p().mul_add(0.4, 0.0).exp_m1());
    let norm = normalize_store(&raw);
    let d = feature_delta("top", "low", "t", &norm);
    for g in FeatureId::all() {
        let want = if g == f { 0.6 } else { 0.0 };
        assert!((d.get(g) - want).abs() < 1e-12);
    }
    assert!(feature_delta("top", "top", "t", &norm).as_slice().iter().all(|v| *v == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn range_argmax_and_rank_order(seed in any::<u64>()) {
        let raw = random_store(seed);
        let norm = normalize_store(&raw);
        check_range_and_argmax(&raw, &norm)?;

        // Sort-comparison oracle: ordering users by raw value and by
        // normalized value gives the same sequence.
        let ng = groups(norm.store());
        for (key, values) in groups(&raw) {
            let mut by_raw = values.clone();
            by_raw.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let mut by_norm = ng[&key].clone();
            by_norm.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let names = |v: &[(String, f64)]| v.iter().map(|x| x.0.clone()).collect::<Vec<_>>();
            prop_assert_eq!(names(&by_raw), names(&by_norm));
        }
    }

    #[test]
    fn normalizing_twice_keeps_invariants(seed in any::<u64>()) {
        let raw = random_store(seed);
        let once = normalize_store(&raw);
        let twice = normalize_store(once.store());
        check_range_and_argmax(&raw, &twice)?;
    }

    #[test]
    fn deltas_are_bounded_and_antisymmetric(seed in any::<u64>(), a in 0usize..25, b in 0usize..25, t in 0usize..4) {
        let norm = normalize_store(&random_store(seed));
        let (ua, ub, topic) = (format!("u{a}"), format!("u{b}"), format!("t{t}"));
        let d = feature_delta(&ua, &ub, &topic, &norm);
        let r = feature_delta(&ub, &ua, &topic, &norm);
        prop_assert_eq!(d.negated(), r);
        prop_assert!(d.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}
