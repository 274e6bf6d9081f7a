//! Two-step pairwise model: per-network NNLS fits on feature deltas, then a
//! global NNLS fit over the per-network score deltas. Final weights are the
//! network weights scaled by their global weight, concatenated in catalog
//! order.

use std::path::Path;

use rayon::prelude::*;

use crate::catalog::{self, FeatureId, Network, CATALOG_LEN};
use crate::features::FeatureRow;
use crate::groundtruth::PairLabel;
use crate::nnls::{solve_nnls, DesignMatrix};
use crate::normalize::{feature_delta, FeatureDelta, NormalizedFeatureStore};
use crate::{tsv, Error, Result, TopicId, UserId};

pub const NNLS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub network: Network,
    pub features: Vec<FeatureId>,
    /// Aligned with `features`.
    pub weights: Vec<f64>,
    /// Training rows with a non-zero delta on this network.
    pub rows: usize,
    /// Set when there was nothing to fit.
    pub empty: bool,
}

impl NetworkModel {
    fn zero(network: Network) -> Self {
        let features = catalog::network_features(network);
        NetworkModel {
            network,
            weights: vec![0.0; features.len()],
            features,
            rows: 0,
            empty: true,
        }
    }

    /// Network score of a delta (or of a normalized vector).
    pub fn apply(&self, v: &FeatureRow) -> f64 {
        self.features
            .iter()
            .zip(&self.weights)
            .map(|(f, w)| w * v[f.index()])
            .sum()
    }
}

/// Deltas for every label, computed once and shared by both training steps.
pub fn label_deltas(labels: &[PairLabel], norm: &NormalizedFeatureStore) -> Vec<(FeatureDelta, f64)> {
    labels
        .iter()
        .map(|l| (feature_delta(&l.u1, &l.u2, &l.topic, norm), l.label.value()))
        .collect()
}

pub fn train_network_model(
    network: Network,
    labels: &[PairLabel],
    norm: &NormalizedFeatureStore,
) -> Result<NetworkModel> {
    train_network_from_deltas(network, &label_deltas(labels, norm))
}

pub fn train_network_from_deltas(network: Network, deltas: &[(FeatureDelta, f64)]) -> Result<NetworkModel> {
    let mut model = NetworkModel::zero(network);
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (d, y) in deltas {
        let row: Vec<f64> = model.features.iter().map(|f| d.get(*f)).collect();
        if row.iter().any(|&v| v != 0.0) {
            rows.push(row);
            targets.push(*y);
        }
    }
    if rows.is_empty() {
        return Ok(model);
    }
    let a = DesignMatrix::from_rows(&rows)?;
    let sol = solve_nnls(&a, &targets, NNLS_TOL)?;
    model.weights = sol.weights;
    model.rows = rows.len();
    model.empty = false;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    /// One weight per network model, same order.
    pub weights: Vec<(Network, f64)>,
    pub empty: bool,
}

pub fn train_global_model(
    labels: &[PairLabel],
    models: &[NetworkModel],
    norm: &NormalizedFeatureStore,
) -> Result<GlobalModel> {
    train_global_from_deltas(&label_deltas(labels, norm), models)
}

pub fn train_global_from_deltas(deltas: &[(FeatureDelta, f64)], models: &[NetworkModel]) -> Result<GlobalModel> {
    let zero = GlobalModel {
        weights: models.iter().map(|m| (m.network, 0.0)).collect(),
        empty: true,
    };
    if models.is_empty() || deltas.is_empty() {
        return Ok(zero);
    }
    let rows: Vec<Vec<f64>> = deltas
        .iter()
        .map(|(d, _)| models.iter().map(|m| m.apply(&d.0)).collect())
        .collect();
    if rows.iter().all(|r| r.iter().all(|&v| v == 0.0)) {
        return Ok(zero);
    }
    let targets: Vec<f64> = deltas.iter().map(|(_, y)| *y).collect();
    let sol = solve_nnls(&DesignMatrix::from_rows(&rows)?, &targets, NNLS_TOL)?;
    Ok(GlobalModel {
        weights: models.iter().map(|m| m.network).zip(sol.weights).collect(),
        empty: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertiseModel {
    pub networks: Vec<NetworkModel>,
    pub global: GlobalModel,
    /// Final weight vector in catalog order.
    pub weights: FeatureRow,
    pub seed: u64,
    pub reference_ts: Option<i64>,
}

/// `w_k = network_weight_k × g_network(k)`.
pub fn finalize_weights(models: Vec<NetworkModel>, global: GlobalModel) -> ExpertiseModel {
    let mut weights = [0.0; CATALOG_LEN];
    for m in &models {
        let g = global
            .weights
            .iter()
            .find(|(n, _)| *n == m.network)
            .map_or(0.0, |(_, g)| *g);
        for (f, w) in m.features.iter().zip(&m.weights) {
            weights[f.index()] = w * g;
        }
    }
    ExpertiseModel {
        networks: models,
        global,
        weights,
        seed: 0,
        reference_ts: None,
    }
}

/// Runs both steps on (already deduplicated) training labels.
pub fn train(labels: &[PairLabel], norm: &NormalizedFeatureStore) -> Result<ExpertiseModel> {
    let deltas = label_deltas(labels, norm);
    let models = catalog::networks()
        .into_iter()
        .map(|n| train_network_from_deltas(n, &deltas))
        .collect::<Result<Vec<_>>>()?;
    let global = train_global_from_deltas(&deltas, &models)?;
    let mut model = finalize_weights(models, global);
    model.reference_ts = norm.store().reference_ts;
    Ok(model)
}

/// `w · v` in catalog order.
pub fn dot(w: &FeatureRow, v: &FeatureRow) -> f64 {
    let mut s = 0.0;
    for i in 0..CATALOG_LEN {
        s += w[i] * v[i];
    }
    s
}

impl ExpertiseModel {
    pub fn score(&self, user: &str, topic: &str, norm: &NormalizedFeatureStore) -> f64 {
        score(user, topic, self, norm)
    }

    pub fn global_weight(&self, network: Network) -> f64 {
        self.global
            .weights
            .iter()
            .find(|(n, _)| *n == network)
            .map_or(0.0, |(_, g)| *g)
    }

    /// Score restricted to one network's features (final weights).
    pub fn network_score(&self, v: &FeatureRow, network: Network) -> f64 {
        FeatureId::all()
            .filter(|f| f.network() == network)
            .map(|f| self.weights[f.index()] * v[f.index()])
            .sum()
    }

    pub fn flagged(&self) -> Vec<Network> {
        self.networks.iter().filter(|m| m.empty).map(|m| m.network).collect()
    }

    /// Header, then `feature_id<TAB>final_weight` and `network<TAB>g` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# catalog_hash={} seed={}", catalog::catalog_hash(), self.seed);
        match self.reference_ts {
            Some(ts) => out.push_str(&format!(" date={} reference_ts={ts}", civil_date(ts))),
            None => out.push_str(" date=unknown"),
        }
        let flagged: Vec<&str> = self.flagged().iter().map(|n| n.as_str()).collect();
        if !flagged.is_empty() {
            out.push_str(&format!(" empty_networks={}", flagged.join(",")));
        }
        out.push('\n');
        for f in FeatureId::all() {
            out.push_str(&format!("{}\t{}\n", f.name(), self.weights[f.index()]));
        }
        for (n, g) in &self.global.weights {
            out.push_str(&format!("{n}\t{g}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let hash = tsv::header_value(text, "catalog_hash")
            .ok_or_else(|| Error::Parse("model file has no catalog_hash header".into()))?;
        if hash != catalog::catalog_hash() {
            return Err(Error::Validation(format!(
                "model was trained against a different feature catalog ({hash})"
            )));
        }
        let seed = tsv::header_value(text, "seed").and_then(|s| s.parse().ok()).unwrap_or(0);
        let reference_ts = tsv::header_value(text, "reference_ts").and_then(|s| s.parse().ok());
        let empty: Vec<&str> = tsv::header_value(text, "empty_networks")
            .map(|s| s.split(',').collect())
            .unwrap_or_default();
        let mut weights = [0.0; CATALOG_LEN];
        let mut global = Vec::new();
        for (lineno, line) in tsv::data_lines(text) {
            let f = tsv::fields(line, 2, lineno)?;
            let v = tsv::parse_f64(f[1], lineno)?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("line {lineno}: weight must be non-negative, found {v}")));
            }
            if let Ok(fid) = f[0].parse::<FeatureId>() {
                weights[fid.index()] = v;
            } else if let Ok(n) = f[0].parse::<Network>() {
                global.push((n, v));
            } else {
                return Err(Error::Parse(format!("line {lineno}: unknown feature or network \"{}\"", f[0])));
            }
        }
        let networks = global
            .iter()
            .map(|&(n, g)| {
                let features = catalog::network_features(n);
                let weights = features
                    .iter()
                    .map(|f| if g > 0.0 { weights[f.index()] / g } else { 0.0 })
                    .collect();
                NetworkModel {
                    network: n,
                    features,
                    weights,
                    rows: 0,
                    empty: empty.contains(&n.as_str()),
                }
            })
            .collect();
        Ok(ExpertiseModel {
            networks,
            global: GlobalModel { weights: global, empty: false },
            weights,
            seed,
            reference_ts,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&tsv::read_to_string(path)?)
    }
}

/// `E(u, t) = w · f̂(u, t)`; absent features read as zero.
pub fn score(user: &str, topic: &str, model: &ExpertiseModel, norm: &NormalizedFeatureStore) -> f64 {
    match norm.store().row(user, topic) {
        Some(row) => dot(&model.weights, row),
        None => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertiseScore {
    pub user: UserId,
    pub topic: TopicId,
    pub score: f64,
}

/// Scores every stored (user, topic) row, keeping positive scores, in key order.
pub fn score_all(model: &ExpertiseModel, norm: &NormalizedFeatureStore) -> Vec<ExpertiseScore> {
    let rows: Vec<_> = norm.store().rows().collect();
    rows.par_iter()
        .map(|(u, t, row)| ExpertiseScore {
            user: (*u).clone(),
            topic: (*t).clone(),
            score: dot(&model.weights, row),
        })
        .filter(|s| s.score > 0.0)
        .collect()
}

pub fn scores_to_tsv(scores: &[ExpertiseScore]) -> String {
    let mut out = String::from("# user\ttopic\tscore\n");
    for s in scores {
        out.push_str(&format!("{}\t{}\t{}\n", s.user, s.topic, s.score));
    }
    out
}

pub fn parse_scores(text: &str) -> Result<Vec<ExpertiseScore>> {
    tsv::data_lines(text)
        .map(|(lineno, line)| {
            let f = tsv::fields(line, 3, lineno)?;
            Ok(ExpertiseScore {
                user: f[0].to_string(),
                topic: f[1].to_string(),
                score: tsv::parse_f64(f[2], lineno)?,
            })
        })
        .collect()
}

pub fn load_scores(path: &Path) -> Result<Vec<ExpertiseScore>> {
    parse_scores(&tsv::read_to_string(path)?)
}

/// UTC `YYYY-MM-DD` for a Unix timestamp.
pub fn civil_date(ts: i64) -> String {
    // Days-to-civil conversion on the proleptic Gregorian calendar.
    let z = ts.div_euclid(86_400) + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = yoe + era * 400 + i64::from(month <= 2);
    format!("{year:04}-{month:02}-{day:02}")
}
