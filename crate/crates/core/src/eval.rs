//! Held-out evaluation: per-feature and model-level precision/recall/F1,
//! coverage, predictability heatmaps, distribution exports and super-topic
//! rollups. All reports are tab-separated with one header line.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::catalog::{FeatureId, Network};
use crate::features::FeatureStore;
use crate::groundtruth::PairLabel;
use crate::model::ExpertiseModel;
use crate::normalize::NormalizedFeatureStore;
use crate::ontology::TopicOntology;
use crate::{TopicId, UserId};

/// Highest connectivity bucket (10^8 and above).
pub const MAX_BUCKET: usize = 8;
pub const GRID: usize = MAX_BUCKET + 1;
/// Log-spaced histogram resolution for raw values.
pub const BINS_PER_DECADE: i32 = 4;
pub const DELTA_BIN_WIDTH: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMetrics {
    /// Feature name, or `MODEL`.
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub coverage: f64,
    pub predicted: usize,
    pub correct: usize,
    pub total: usize,
    /// No labels were available.
    pub empty: bool,
}

impl FeatureMetrics {
    pub fn from_counts(name: &str, correct: usize, predicted: usize, total: usize, coverage: f64) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(correct, predicted);
        let recall = ratio(correct, total);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        FeatureMetrics {
            name: name.to_string(),
            precision,
            recall,
            f1,
            coverage,
            predicted,
            correct,
            total,
            empty: total == 0,
        }
    }

    pub const TSV_HEADER: &'static str = "feature\tprecision\trecall\tf1\tcoverage\tpredicted\tcorrect\ttotal\n";

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            self.name, self.precision, self.recall, self.f1, self.coverage, self.predicted, self.correct, self.total
        )
    }
}

/// `(correct, predicted)` for labelled deltas. Zero deltas are not predictions.
pub fn count_predictions(pairs: impl IntoIterator<Item = (f64, f64)>) -> (usize, usize) {
    let mut correct = 0;
    let mut predicted = 0;
    for (delta, label) in pairs {
        if delta != 0.0 {
            predicted += 1;
            if label * delta.signum() > 0.0 {
                correct += 1;
            }
        }
    }
    (correct, predicted)
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Users with a non-zero value for `feature` in any topic.
pub fn feature_users(feature: FeatureId, norm: &NormalizedFeatureStore) -> BTreeSet<&UserId> {
    norm.store()
        .rows()
        .filter(|(_, _, row)| row[feature.index()] != 0.0)
        .map(|(u, _, _)| u)
        .collect()
}

pub fn evaluate_feature(
    feature: FeatureId,
    labels: &[PairLabel],
    norm: &NormalizedFeatureStore,
    corpus_users: usize,
) -> FeatureMetrics {
    let (correct, predicted) = count_predictions(labels.iter().map(|l| {
        let d = norm.get(&l.u1, &l.topic, feature) - norm.get(&l.u2, &l.topic, feature);
        (d, l.label.value())
    }));
    let coverage = ratio(feature_users(feature, norm).len(), corpus_users);
    FeatureMetrics::from_counts(&feature.name(), correct, predicted, labels.len(), coverage)
}

/// Model-level metrics using the score difference as the prediction.
pub fn evaluate_model(
    model: &ExpertiseModel,
    labels: &[PairLabel],
    norm: &NormalizedFeatureStore,
    corpus_users: usize,
) -> FeatureMetrics {
    let (correct, predicted) = count_predictions(labels.iter().map(|l| {
        let d = model.score(&l.u1, &l.topic, norm) - model.score(&l.u2, &l.topic, norm);
        (d, l.label.value())
    }));
    let scored: BTreeSet<&UserId> = norm
        .store()
        .rows()
        .filter(|(u, t, _)| model.score(u, t, norm) > 0.0)
        .map(|(u, _, _)| u)
        .collect();
    FeatureMetrics::from_counts("MODEL", correct, predicted, labels.len(), ratio(scored.len(), corpus_users))
}

/// Share of labels whose order the model gets right. Ties count as wrong.
pub fn pairwise_accuracy(model: &ExpertiseModel, labels: &[PairLabel], norm: &NormalizedFeatureStore) -> f64 {
    let (correct, _) = count_predictions(labels.iter().map(|l| {
        let d = model.score(&l.u1, &l.topic, norm) - model.score(&l.u2, &l.topic, norm);
        (d, l.label.value())
    }));
    ratio(correct, labels.len())
}

/// One row per catalog feature, then the model row.
pub fn metrics_table(
    model: &ExpertiseModel,
    labels: &[PairLabel],
    norm: &NormalizedFeatureStore,
    corpus_users: usize,
) -> Vec<FeatureMetrics> {
    let features: Vec<FeatureId> = FeatureId::all().collect();
    let mut rows: Vec<FeatureMetrics> = features
        .par_iter()
        .map(|&f| evaluate_feature(f, labels, norm, corpus_users))
        .collect();
    rows.push(evaluate_model(model, labels, norm, corpus_users));
    rows
}

pub fn metrics_to_tsv(rows: &[FeatureMetrics]) -> String {
    let mut out = FeatureMetrics::TSV_HEADER.to_string();
    for r in rows {
        out.push_str(&r.to_line());
    }
    out
}

pub fn connectivity_bucket(c: f64) -> usize {
    (c.max(1.0).log10().floor() as usize).min(MAX_BUCKET)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    /// `values[i][j]`: mean |delta| of correct predictions with u1 in bucket i, u2 in bucket j.
    pub values: [[f64; GRID]; GRID],
    pub counts: [[usize; GRID]; GRID],
}

impl HeatmapGrid {
    pub fn transposed(&self) -> HeatmapGrid {
        let mut t = self.clone();
        for i in 0..GRID {
            for j in 0..GRID {
                t.values[i][j] = self.values[j][i];
                t.counts[i][j] = self.counts[j][i];
            }
        }
        t
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("bucket_u1\tbucket_u2\tcount\tmean_abs_delta\n");
        for i in 0..GRID {
            for j in 0..GRID {
                if self.counts[i][j] > 0 {
                    out.push_str(&format!("{i}\t{j}\t{}\t{}\n", self.counts[i][j], self.values[i][j]));
                }
            }
        }
        out
    }
}

/// Users without a known connectivity fall in bucket 0.
pub fn predictability_heatmap(
    feature: FeatureId,
    labels: &[PairLabel],
    norm: &NormalizedFeatureStore,
    connectivity: &BTreeMap<UserId, f64>,
) -> HeatmapGrid {
    let mut sums = [[0.0; GRID]; GRID];
    let mut counts = [[0usize; GRID]; GRID];
    let bucket = |u: &str| connectivity_bucket(connectivity.get(u).copied().unwrap_or(0.0));
    for l in labels {
        let d = norm.get(&l.u1, &l.topic, feature) - norm.get(&l.u2, &l.topic, feature);
        if d != 0.0 && l.label.value() * d.signum() > 0.0 {
            let (i, j) = (bucket(&l.u1), bucket(&l.u2));
            sums[i][j] += d.abs();
            counts[i][j] += 1;
        }
    }
    let mut values = [[0.0; GRID]; GRID];
    for i in 0..GRID {
        for j in 0..GRID {
            if counts[i][j] > 0 {
                values[i][j] = sums[i][j] / counts[i][j] as f64;
            }
        }
    }
    HeatmapGrid { values, counts }
}

/// Index of the log-spaced bin holding `v > 0`.
pub fn value_bin(v: f64) -> i32 {
    (v.log10() * BINS_PER_DECADE as f64).floor() as i32
}

pub fn value_bin_bounds(bin: i32) -> (f64, f64) {
    let k = BINS_PER_DECADE as f64;
    (10f64.powf(bin as f64 / k), 10f64.powf((bin + 1) as f64 / k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionReports {
    /// Stored (user, topic) values per log-spaced raw value bin, with density.
    pub value_histogram: String,
    /// Users possessing each feature per connectivity bucket.
    pub connectivity_users: String,
    /// Labels per normalized delta bin and label sign.
    pub delta_histogram: String,
}

impl DistributionReports {
    pub const FILES: [&'static str; 3] = [
        "feature_value_histogram.tsv",
        "feature_users_by_connectivity.tsv",
        "groundtruth_delta_histogram.tsv",
    ];

    pub fn files(&self) -> [(&'static str, &str); 3] {
        [
            (Self::FILES[0], &self.value_histogram),
            (Self::FILES[1], &self.connectivity_users),
            (Self::FILES[2], &self.delta_histogram),
        ]
    }
}

/// Histogram rows `(bin, lo, hi, count, density)` for one feature's raw values.
pub fn value_histogram(values: impl IntoIterator<Item = f64>) -> Vec<(i32, f64, f64, usize, f64)> {
    let mut bins: BTreeMap<i32, usize> = BTreeMap::new();
    for v in values.into_iter().filter(|v| *v > 0.0) {
        *bins.entry(value_bin(v)).or_default() += 1;
    }
    bins.into_iter()
        .map(|(b, n)| {
            let (lo, hi) = value_bin_bounds(b);
            (b, lo, hi, n, n as f64 / (hi - lo))
        })
        .collect()
}

pub fn delta_bin(d: f64) -> i32 {
    ((d / DELTA_BIN_WIDTH).floor() as i32).clamp(-10, 9)
}

pub fn export_distributions(
    raw: &FeatureStore,
    norm: &NormalizedFeatureStore,
    connectivity: &BTreeMap<UserId, f64>,
    labels: &[PairLabel],
) -> DistributionReports {
    let mut value_hist = String::from("feature\tbin_lo\tbin_hi\tcount\tdensity\n");
    let mut connectivity_users = String::from("feature\tlog10_connectivity\tusers\n");
    let mut delta_histogram = String::from("feature\tdelta_lo\tdelta_hi\tlabel\tcount\n");
    for f in FeatureId::all() {
        let name = f.name();
        let values = raw.iter().filter(|e| e.2 == f).map(|e| e.3);
        for (_, lo, hi, n, density) in value_histogram(values) {
            value_hist.push_str(&format!("{name}\t{lo}\t{hi}\t{n}\t{density}\n"));
        }

        let users: BTreeSet<&UserId> = raw.iter().filter(|e| e.2 == f).map(|e| e.0).collect();
        let mut by_bucket = [0usize; GRID];
        for u in users {
            by_bucket[connectivity_bucket(connectivity.get(u).copied().unwrap_or(0.0))] += 1;
        }
        for (b, n) in by_bucket.iter().enumerate().filter(|(_, n)| **n > 0) {
            connectivity_users.push_str(&format!("{name}\t{b}\t{n}\n"));
        }

        let mut deltas: BTreeMap<(i32, i8), usize> = BTreeMap::new();
        for l in labels {
            let d = norm.get(&l.u1, &l.topic, f) - norm.get(&l.u2, &l.topic, f);
            if d != 0.0 {
                *deltas.entry((delta_bin(d), l.label.value() as i8)).or_default() += 1;
            }
        }
        for ((b, label), n) in deltas {
            let lo = b as f64 * DELTA_BIN_WIDTH;
            let hi = (b + 1) as f64 * DELTA_BIN_WIDTH;
            delta_histogram.push_str(&format!("{name}\t{lo:.1}\t{hi:.1}\t{label}\t{n}\n"));
        }
    }
    DistributionReports {
        value_histogram: value_hist,
        connectivity_users,
        delta_histogram,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollupColumn {
    /// Network name or `ALL`.
    pub label: String,
    /// Super-topic slug → users whose top super-topic it is.
    pub counts: BTreeMap<String, usize>,
    /// Users with no positive score.
    pub excluded: usize,
}

impl RollupColumn {
    pub fn attributed(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn percentages(&self) -> BTreeMap<String, f64> {
        let total = self.attributed();
        self.counts
            .iter()
            .map(|(s, n)| (s.clone(), 100.0 * *n as f64 / total as f64))
            .collect()
    }
}

/// Attributes each user to the super-topic with the largest summed score.
/// Ties go to the lexicographically smaller slug. Topics outside the
/// ontology are ignored.
pub fn supertopic_rollup(
    label: &str,
    scores: &BTreeMap<(UserId, TopicId), f64>,
    users: &BTreeSet<UserId>,
    ontology: &TopicOntology,
) -> RollupColumn {
    let mut per_user: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for ((u, t), s) in scores {
        if *s > 0.0 {
            if let Some(sup) = ontology.super_of(t) {
                *per_user.entry(u).or_default().entry(sup.slug.as_str()).or_default() += s;
            }
        }
    }
    let mut counts = BTreeMap::new();
    for sums in per_user.values() {
        let mut best: Option<(&str, f64)> = None;
        for (&slug, &s) in sums {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((slug, s));
            }
        }
        if let Some((slug, _)) = best {
            *counts.entry(slug.to_string()).or_default() += 1;
        }
    }
    let attributed = per_user.len();
    let mut all: BTreeSet<&str> = users.iter().map(|u| u.as_str()).collect();
    all.extend(scores.keys().map(|(u, _)| u.as_str()));
    RollupColumn {
        label: label.to_string(),
        counts,
        excluded: all.len() - attributed,
    }
}

/// Rollup per network (from network-restricted final weights) and combined.
pub fn network_rollups(
    model: &ExpertiseModel,
    norm: &NormalizedFeatureStore,
    users: &BTreeSet<UserId>,
    ontology: &TopicOntology,
) -> Vec<RollupColumn> {
    let labels: Vec<Option<Network>> = Network::ALL.iter().copied().map(Some).chain([None]).collect();
    labels
        .into_iter()
        .map(|net| {
            let scores = norm
                .store()
                .rows()
                .map(|(u, t, row)| {
                    let s = match net {
                        Some(n) => model.network_score(row, n),
                        None => crate::model::dot(&model.weights, row),
                    };
                    ((u.clone(), t.clone()), s)
                })
                .collect();
            let name = net.map_or("ALL".to_string(), |n| n.to_string());
            supertopic_rollup(&name, &scores, users, ontology)
        })
        .collect()
}

pub fn rollup_to_tsv(columns: &[RollupColumn]) -> String {
    let mut out = String::from("network\tsupertopic\tusers\tpercent\n");
    for c in columns {
        for (slug, pct) in c.percentages() {
            out.push_str(&format!("{}\t{slug}\t{}\t{pct}\n", c.label, c.counts[&slug]));
        }
        out.push_str(&format!("{}\t(excluded)\t{}\t\n", c.label, c.excluded));
    }
    out
}
