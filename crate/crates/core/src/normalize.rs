//! Population rescaling of raw features and pairwise feature deltas.
//!
//! Each (feature, topic) group is rescaled as `ln(1 + f) / max_u ln(1 + f)`,
//! so the strongest user in a group maps to exactly 1.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::catalog::{FeatureId, CATALOG_LEN};
use crate::features::{FeatureRow, FeatureStore};
use crate::{tsv, Error, Result, TopicId};

/// Feature store whose values all lie in [0, 1].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormalizedFeatureStore(FeatureStore);

impl NormalizedFeatureStore {
    /// Wraps a store after checking the [0, 1] range.
    pub fn from_store(store: FeatureStore) -> Result<Self> {
        if let Some((u, t, f, v)) = store.iter().find(|(_, _, _, v)| *v > 1.0) {
            return Err(Error::Validation(format!(
                "normalized value {v} out of range for {u} {t} {f}"
            )));
        }
        Ok(NormalizedFeatureStore(store))
    }

    pub fn store(&self) -> &FeatureStore {
        &self.0
    }

    pub fn into_inner(self) -> FeatureStore {
        self.0
    }

    pub fn get(&self, user: &str, topic: &str, feature: FeatureId) -> f64 {
        self.0.get(user, topic, feature)
    }

    /// Normalized vector for (user, topic); zeros when absent.
    pub fn vector(&self, user: &str, topic: &str) -> FeatureRow {
        self.0.row(user, topic).copied().unwrap_or([0.0; CATALOG_LEN])
    }

    pub fn to_tsv(&self) -> String {
        self.0.to_tsv(true)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (store, normalized) = FeatureStore::parse(text)?;
        if !normalized {
            return Err(Error::Validation(
                "feature file is not flagged normalized=true".into(),
            ));
        }
        Self::from_store(store)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&tsv::read_to_string(path)?)
    }
}

/// Per-(feature, topic) maximum of `ln(1 + f)`.
pub fn group_log_max(raw: &FeatureStore) -> BTreeMap<(FeatureId, TopicId), f64> {
    let mut max: BTreeMap<(FeatureId, TopicId), f64> = BTreeMap::new();
    for (_, t, f, v) in raw.iter() {
        let m = max.entry((f, t.clone())).or_insert(0.0);
        *m = m.max(v.ln_1p());
    }
    max
}

pub fn normalize_store(raw: &FeatureStore) -> NormalizedFeatureStore {
    let max = group_log_max(raw);
    let rows: Vec<(&String, &String, &FeatureRow)> = raw.rows().collect();
    let scaled: Vec<FeatureRow> = rows
        .par_iter()
        .map(|(_, t, row)| {
            let mut out = [0.0; CATALOG_LEN];
            for f in FeatureId::all() {
                let v = row[f.index()];
                if v > 0.0 {
                    let m = max[&(f, (*t).clone())];
                    if m > 0.0 {
                        out[f.index()] = (v.ln_1p() / m).min(1.0);
                    }
                }
            }
            out
        })
        .collect();
    let mut store = FeatureStore::new();
    store.reference_ts = raw.reference_ts;
    for ((u, t, _), row) in rows.into_iter().zip(scaled) {
        store.insert_row(u.clone(), t.clone(), row);
    }
    NormalizedFeatureStore(store)
}

/// Elementwise difference of two users' normalized vectors, catalog order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureDelta(pub FeatureRow);

impl FeatureDelta {
    pub fn get(&self, f: FeatureId) -> f64 {
        self.0[f.index()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn negated(&self) -> FeatureDelta {
        FeatureDelta(self.0.map(|v| -v))
    }
}

pub fn feature_delta(u1: &str, u2: &str, topic: &str, norm: &NormalizedFeatureStore) -> FeatureDelta {
    let a = norm.vector(u1, topic);
    let b = norm.vector(u2, topic);
    let mut out = [0.0; CATALOG_LEN];
    for i in 0..CATALOG_LEN {
        out[i] = a[i] - b[i];
    }
    FeatureDelta(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fid(i: usize) -> FeatureId {
        FeatureId::from_index(i).unwrap()
    }

    #[test]
    fn log1p_scaling() {
        let e = std::f64::consts::E;
        let mut raw = FeatureStore::new();
        raw.add("a", "t", fid(0), e - 1.0);
        raw.add("b", "t", fid(0), e * e - 1.0);
        let n = normalize_store(&raw);
        assert!((n.get("a", "t", fid(0)) - 0.5).abs() < 1e-12);
        assert_eq!(n.get("b", "t", fid(0)), 1.0);
    }

    #[test]
    fn single_user_is_one() {
        let mut raw = FeatureStore::new();
        raw.add("a", "t", fid(3), 0.0042);
        raw.add("a", "s", fid(3), 12345.0);
        let n = normalize_store(&raw);
        assert_eq!(n.get("a", "t", fid(3)), 1.0);
        assert_eq!(n.get("a", "s", fid(3)), 1.0);
    }

    #[test]
    fn groups_are_per_feature_and_topic() {
        let mut raw = FeatureStore::new();
        raw.add("a", "t", fid(0), 100.0);
        raw.add("b", "t", fid(1), 1.0);
        raw.add("b", "s", fid(0), 1.0);
        let n = normalize_store(&raw);
        assert_eq!(n.get("a", "t", fid(0)), 1.0);
        assert_eq!(n.get("b", "t", fid(1)), 1.0);
        assert_eq!(n.get("b", "s", fid(0)), 1.0);
    }

    #[test]
    fn delta_examples() {
        let mut raw = FeatureStore::new();
        raw.set("u1", "t", fid(2), 1.0);
        raw.set("u2", "t", fid(2), 0.4);
        let norm = NormalizedFeatureStore::from_store(raw).unwrap();
        let d = feature_delta("u1", "u2", "t", &norm);
        assert!((d.get(fid(2)) - 0.6).abs() < 1e-12);
        assert_eq!(d.0.iter().filter(|v| **v != 0.0).count(), 1);
        assert!(feature_delta("u1", "u1", "t", &norm).0.iter().all(|v| *v == 0.0));
        assert_eq!(feature_delta("u2", "u1", "t", &norm), d.negated());
        assert!(feature_delta("u1", "nobody", "t", &norm).0.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn normalized_flag_is_checked() {
        let mut raw = FeatureStore::new();
        raw.add("a", "t", fid(0), 3.0);
        assert!(NormalizedFeatureStore::parse(&raw.to_tsv(false)).is_err());
        assert!(NormalizedFeatureStore::from_store(raw).is_err());
        let n = normalize_store(&{
            let mut s = FeatureStore::new();
            s.add("a", "t", fid(0), 3.0);
            s
        });
        assert_eq!(NormalizedFeatureStore::parse(&n.to_tsv()).unwrap(), n);
    }
}
