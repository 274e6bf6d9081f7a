//! Evaluator-sorted lists, pairwise labels, consensus statistics and the
//! train/test split.
//!
//! Ground-truth file, one evaluation per line:
//! `evaluator<TAB>topic<TAB>sorted,users,best,first<TAB>unsortable,users`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::{tsv, Error, Result, TopicId, UserId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedEvaluation {
    pub evaluator: String,
    pub topic: TopicId,
    /// Best expert first.
    pub sorted: Vec<UserId>,
    pub unsortable: Vec<UserId>,
}

impl SortedEvaluation {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for u in &self.sorted {
            if !seen.insert(u) {
                return Err(Error::Validation(format!(
                    "evaluation {}/{}: duplicate user {u}",
                    self.evaluator, self.topic
                )));
            }
        }
        if let Some(u) = self.unsortable.iter().find(|u| seen.contains(u)) {
            return Err(Error::Validation(format!(
                "evaluation {}/{}: user {u} is both sorted and unsortable",
                self.evaluator, self.topic
            )));
        }
        Ok(())
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.evaluator,
            self.topic,
            self.sorted.join(","),
            self.unsortable.join(",")
        )
    }
}

fn split_users(field: &str) -> Vec<UserId> {
    field
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

pub fn parse_groundtruth(text: &str) -> Result<Vec<SortedEvaluation>> {
    let mut out = Vec::new();
    for (lineno, line) in tsv::data_lines(text) {
        let parts: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(Error::Parse(format!(
                "line {lineno}: expected 4 tab-separated fields, found {}",
                parts.len()
            )));
        }
        let ev = SortedEvaluation {
            evaluator: parts[0].to_string(),
            topic: parts[1].to_string(),
            sorted: split_users(parts[2]),
            unsortable: parts.get(3).map(|f| split_users(f)).unwrap_or_default(),
        };
        ev.validate()
            .map_err(|e| Error::Validation(format!("line {lineno}: {e}")))?;
        out.push(ev);
    }
    Ok(out)
}

pub fn load_groundtruth(path: &Path) -> Result<Vec<SortedEvaluation>> {
    parse_groundtruth(&tsv::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    /// `u1` is the greater expert.
    Up,
    /// `u2` is the greater expert.
    Down,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Up => 1.0,
            Label::Down => -1.0,
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Up => Label::Down,
            Label::Down => Label::Up,
        }
    }

    fn parse(s: &str) -> Option<Label> {
        match s {
            "1" | "+1" => Some(Label::Up),
            "-1" => Some(Label::Down),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairLabel {
    pub u1: UserId,
    pub u2: UserId,
    pub topic: TopicId,
    pub label: Label,
    pub evaluator: String,
}

impl PairLabel {
    /// The same judgment stated for `(u2, u1)`.
    pub fn swapped(&self) -> PairLabel {
        PairLabel {
            u1: self.u2.clone(),
            u2: self.u1.clone(),
            topic: self.topic.clone(),
            label: self.label.flip(),
            evaluator: self.evaluator.clone(),
        }
    }

    /// Orientation with `u1 < u2`.
    pub fn canonical(&self) -> PairLabel {
        if self.u1 <= self.u2 {
            self.clone()
        } else {
            self.swapped()
        }
    }

    /// Unordered (pair, topic) key.
    pub fn key(&self) -> PairKey {
        let (a, b) = if self.u1 <= self.u2 {
            (&self.u1, &self.u2)
        } else {
            (&self.u2, &self.u1)
        };
        PairKey {
            a: a.clone(),
            b: b.clone(),
            topic: self.topic.clone(),
        }
    }

    /// The user voted up.
    pub fn winner(&self) -> &UserId {
        match self.label {
            Label::Up => &self.u1,
            Label::Down => &self.u2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairKey {
    pub a: UserId,
    pub b: UserId,
    pub topic: TopicId,
}

/// All `N(N-1)/2` pairs of a sorted list: `(u_i, u_j, +1)` for `i < j`.
pub fn explode_pairs(ev: &SortedEvaluation) -> Vec<PairLabel> {
    let n = ev.sorted.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(PairLabel {
                u1: ev.sorted[i].clone(),
                u2: ev.sorted[j].clone(),
                topic: ev.topic.clone(),
                label: Label::Up,
                evaluator: ev.evaluator.clone(),
            });
        }
    }
    out
}

pub fn labels_to_tsv(labels: &[PairLabel]) -> String {
    let mut out = String::from("# u1\tu2\ttopic\tlabel\tevaluator\n");
    for l in labels {
        let v = match l.label {
            Label::Up => "1",
            Label::Down => "-1",
        };
        out.push_str(&format!("{}\t{}\t{}\t{v}\t{}\n", l.u1, l.u2, l.topic, l.evaluator));
    }
    out
}

pub fn parse_labels(text: &str) -> Result<Vec<PairLabel>> {
    let mut out = Vec::new();
    for (lineno, line) in tsv::data_lines(text) {
        let f = tsv::fields(line, 5, lineno)?;
        let label = Label::parse(f[3])
            .ok_or_else(|| Error::Parse(format!("line {lineno}: label must be 1 or -1, found \"{}\"", f[3])))?;
        if f[0] == f[1] {
            return Err(Error::Validation(format!("line {lineno}: pair of identical users {}", f[0])));
        }
        out.push(PairLabel {
            u1: f[0].to_string(),
            u2: f[1].to_string(),
            topic: f[2].to_string(),
            label,
            evaluator: f[4].to_string(),
        });
    }
    Ok(out)
}

pub fn load_labels(path: &Path) -> Result<Vec<PairLabel>> {
    parse_labels(&tsv::read_to_string(path)?)
}

/// Votes on one unordered pair, counted relative to `key.a`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairVotes {
    pub key: PairKey,
    /// Votes for `key.a`.
    pub up: usize,
    /// Votes for `key.b`.
    pub down: usize,
}

impl PairVotes {
    pub fn total(&self) -> usize {
        self.up + self.down
    }

    /// Majority fraction `max(up, down) / total`.
    pub fn consensus(&self) -> f64 {
        self.up.max(self.down) as f64 / self.total() as f64
    }
}

pub fn tally(labels: &[PairLabel]) -> Vec<PairVotes> {
    let mut votes: BTreeMap<PairKey, (usize, usize)> = BTreeMap::new();
    for l in labels {
        let c = l.canonical();
        let e = votes.entry(l.key()).or_insert((0, 0));
        match c.label {
            Label::Up => e.0 += 1,
            Label::Down => e.1 += 1,
        }
    }
    votes
        .into_iter()
        .map(|(key, (up, down))| PairVotes { key, up, down })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bucket {
    pub pairs: usize,
    pub mean_consensus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusReport {
    /// Every voted pair (including single-vote pairs).
    pub pairs: Vec<PairVotes>,
    /// Mean consensus per total-vote count, for pairs with at least 2 votes.
    pub by_votes: BTreeMap<usize, Bucket>,
}

impl ConsensusReport {
    pub fn by_votes_tsv(&self) -> String {
        let mut out = String::from("votes\tpairs\tmean_consensus\n");
        for (v, b) in &self.by_votes {
            out.push_str(&format!("{v}\t{}\t{}\n", b.pairs, b.mean_consensus));
        }
        out
    }

    pub fn pairs_tsv(&self) -> String {
        let mut out = String::from("u1\tu2\ttopic\tup\tdown\tconsensus\n");
        for p in &self.pairs {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                p.key.a,
                p.key.b,
                p.key.topic,
                p.up,
                p.down,
                p.consensus()
            ));
        }
        out
    }
}

fn mean_buckets(items: impl IntoIterator<Item = (usize, f64)>) -> BTreeMap<usize, Bucket> {
    let mut acc: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for (k, c) in items {
        let e = acc.entry(k).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += c;
    }
    acc.into_iter()
        .map(|(k, (n, s))| (k, Bucket { pairs: n, mean_consensus: s / n as f64 }))
        .collect()
}

pub fn consensus(labels: &[PairLabel]) -> ConsensusReport {
    let pairs = tally(labels);
    let by_votes = mean_buckets(
        pairs
            .iter()
            .filter(|p| p.total() >= 2)
            .map(|p| (p.total(), p.consensus())),
    );
    ConsensusReport { pairs, by_votes }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityCurve {
    /// `floor(log10(max(|ΔC|, 1)))` → mean consensus.
    pub buckets: BTreeMap<usize, Bucket>,
    /// Pairs dropped because a user had no connectivity.
    pub excluded: usize,
}

impl ConnectivityCurve {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("log10_connectivity_delta\tpairs\tmean_consensus\n");
        for (k, b) in &self.buckets {
            out.push_str(&format!("{k}\t{}\t{}\n", b.pairs, b.mean_consensus));
        }
        if self.excluded > 0 {
            out.push_str(&format!("# excluded={}\n", self.excluded));
        }
        out
    }
}

pub fn log10_bucket(x: f64) -> usize {
    x.max(1.0).log10().floor() as usize
}

/// Mean consensus of multi-vote pairs bucketed by connectivity difference.
pub fn consensus_by_connectivity_delta(
    labels: &[PairLabel],
    connectivity: &BTreeMap<UserId, f64>,
) -> ConnectivityCurve {
    let mut excluded = 0;
    let mut items = Vec::new();
    for p in tally(labels).into_iter().filter(|p| p.total() >= 2) {
        match (connectivity.get(&p.key.a), connectivity.get(&p.key.b)) {
            (Some(ca), Some(cb)) => items.push((log10_bucket((ca - cb).abs()), p.consensus())),
            _ => excluded += 1,
        }
    }
    ConnectivityCurve {
        buckets: mean_buckets(items),
        excluded,
    }
}

/// One majority label per unordered (pair, topic) in canonical orientation.
/// Ties are dropped. The evaluator field records the vote count.
pub fn dedupe_majority(labels: &[PairLabel]) -> Vec<PairLabel> {
    tally(labels)
        .into_iter()
        .filter(|p| p.up != p.down)
        .map(|p| PairLabel {
            label: if p.up > p.down { Label::Up } else { Label::Down },
            evaluator: format!("majority:{}", p.total()),
            u1: p.key.a,
            u2: p.key.b,
            topic: p.key.topic,
        })
        .collect()
}

/// Seeded, order-independent assignment of a pair key to the test side.
pub fn is_test_pair(key: &PairKey, seed: u64, test_fraction: f64) -> bool {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [&key.a, &key.b, &key.topic] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    let x = u64::from_le_bytes(first) as f64 / 2f64.powi(64);
    x < test_fraction
}

/// Splits labels so that a (pair, topic) never appears on both sides.
pub fn split_train_test(labels: &[PairLabel], seed: u64, test_fraction: f64) -> (Vec<PairLabel>, Vec<PairLabel>) {
    labels
        .iter()
        .cloned()
        .partition(|l| !is_test_pair(&l.key(), seed, test_fraction))
}
