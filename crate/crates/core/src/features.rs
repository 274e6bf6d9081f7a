//! Raw feature extraction and the sparse feature store.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;

use crate::catalog::{Attribution, FeatureId, Network, Source, CATALOG_LEN};
use crate::ingest::{
    partition_by_user, EventRecord, GraphEdgePayload, ListRole, Payload, ProfileField, SharedDocPayload,
    WikiPagePayload,
};
use crate::ontology::{expand_hashtags, BagOfTopics, PhraseDictionary};
use crate::{tsv, Error, Result, TopicId, UserId};

/// Dense per-(user, topic) row in catalog order.
pub type FeatureRow = [f64; CATALOG_LEN];

/// Sparse map (user, topic, feature) → value. Only positive values are
/// stored; absent keys read as zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureStore {
    rows: BTreeMap<(UserId, TopicId), FeatureRow>,
    /// Reference timestamp of the ingest window the store was built from.
    pub reference_ts: Option<i64>,
}

impl FeatureStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `value` to the entry. Non-positive and non-finite values are ignored.
    pub fn add(&mut self, user: &str, topic: &str, feature: FeatureId, value: f64) {
        if !(value > 0.0 && value.is_finite()) {
            return;
        }
        let key = (user.to_string(), topic.to_string());
        let row = self.rows.entry(key).or_insert([0.0; CATALOG_LEN]);
        row[feature.index()] += value;
    }

    /// Overwrites the entry; zero removes it.
    pub fn set(&mut self, user: &str, topic: &str, feature: FeatureId, value: f64) {
        let key = (user.to_string(), topic.to_string());
        if value > 0.0 && value.is_finite() {
            self.rows.entry(key).or_insert([0.0; CATALOG_LEN])[feature.index()] = value;
        } else if let Some(row) = self.rows.get_mut(&key) {
            row[feature.index()] = 0.0;
            if row.iter().all(|&v| v == 0.0) {
                self.rows.remove(&key);
            }
        }
    }

    pub fn get(&self, user: &str, topic: &str, feature: FeatureId) -> f64 {
        self.row(user, topic).map_or(0.0, |r| r[feature.index()])
    }

    pub fn row(&self, user: &str, topic: &str) -> Option<&FeatureRow> {
        // BTreeMap<(String, String), _> cannot be queried with borrowed
        // tuples, so allocate the key.
        self.rows.get(&(user.to_string(), topic.to_string()))
    }

    /// All (user, topic) keys with at least one non-zero feature.
    pub fn rows(&self) -> impl Iterator<Item = (&UserId, &TopicId, &FeatureRow)> {
        self.rows.iter().map(|((u, t), r)| (u, t, r))
    }

    /// Non-zero entries in (user, topic, catalog) order.
    pub fn iter(&self) -> impl Iterator<Item = (&UserId, &TopicId, FeatureId, f64)> {
        self.rows.iter().flat_map(|((u, t), row)| {
            FeatureId::all()
                .filter(move |f| row[f.index()] != 0.0)
                .map(move |f| (u, t, f, row[f.index()]))
        })
    }

    /// Number of stored non-zero entries.
    pub fn len(&self) -> usize {
        self.rows
            .values()
            .map(|r| r.iter().filter(|&&v| v != 0.0).count())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn users(&self) -> BTreeSet<&UserId> {
        self.rows.keys().map(|(u, _)| u).collect()
    }

    pub fn topics(&self) -> BTreeSet<&TopicId> {
        self.rows.keys().map(|(_, t)| t).collect()
    }

    /// Sums partial stores. Contributions to a key are added in partition
    /// order, so the result does not depend on how partials were produced.
    pub fn merge(parts: impl IntoIterator<Item = FeatureStore>) -> FeatureStore {
        let mut out = FeatureStore::new();
        for part in parts {
            out.reference_ts = out.reference_ts.max(part.reference_ts);
            for ((u, t), row) in part.rows {
                let dst = out.rows.entry((u, t)).or_insert([0.0; CATALOG_LEN]);
                for (d, s) in dst.iter_mut().zip(row) {
                    *d += s;
                }
            }
        }
        out
    }

    pub(crate) fn insert_row(&mut self, user: UserId, topic: TopicId, row: FeatureRow) {
        if row.iter().any(|&v| v != 0.0) {
            self.rows.insert((user, topic), row);
        }
    }

    /// `user<TAB>topic<TAB>feature_id<TAB>value` under a `#` header line.
    pub fn to_tsv(&self, normalized: bool) -> String {
        let mut out = format!("# normalized={normalized}");
        if let Some(ts) = self.reference_ts {
            out.push_str(&format!(" reference_ts={ts}"));
        }
        out.push('\n');
        for (u, t, f, v) in self.iter() {
            out.push_str(&format!("{u}\t{t}\t{f}\t{v}\n"));
        }
        out
    }

    /// Parses the persisted form; returns the store and its `normalized` flag.
    pub fn parse(text: &str) -> Result<(FeatureStore, bool)> {
        let normalized = tsv::header_value(text, "normalized") == Some("true");
        let mut store = FeatureStore::new();
        store.reference_ts = tsv::header_value(text, "reference_ts").and_then(|v| v.parse().ok());
        for (lineno, line) in tsv::data_lines(text) {
            let f = tsv::fields(line, 4, lineno)?;
            let feature: FeatureId = f[2]
                .parse()
                .map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
            let value = tsv::parse_f64(f[3], lineno)?;
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Validation(format!(
                    "line {lineno}: stored feature values must be positive, found {value}"
                )));
            }
            store.add(f[0], f[1], feature, value);
        }
        Ok((store, normalized))
    }

    pub fn load(path: &Path) -> Result<(FeatureStore, bool)> {
        Self::parse(&tsv::read_to_string(path)?)
    }
}

/// In-degree per network graph, e.g. `TW_FOLLOWERS → 1200`.
pub type ConnectivityVector = BTreeMap<String, u64>;

/// Euclidean norm of the in-degree vector.
pub fn connectivity(c: &ConnectivityVector) -> f64 {
    c.values().map(|&d| (d as f64) * (d as f64)).sum::<f64>().sqrt()
}

/// Graph ids whose edges count towards in-degree.
pub fn indegree_graph(network: Network, source: Source) -> Option<&'static str> {
    match (network, source) {
        (Network::Twitter, Source::Followers) => Some("TW_FOLLOWERS"),
        (Network::Facebook, Source::Friends) => Some("FB_FRIENDS"),
        _ => None,
    }
}

pub fn connectivity_to_tsv(conn: &BTreeMap<UserId, ConnectivityVector>) -> String {
    let mut out = String::from("# user\tgraph\tin_degree\n");
    for (u, c) in conn {
        for (g, d) in c {
            out.push_str(&format!("{u}\t{g}\t{d}\n"));
        }
    }
    out
}

pub fn parse_connectivity(text: &str) -> Result<BTreeMap<UserId, ConnectivityVector>> {
    let mut out: BTreeMap<UserId, ConnectivityVector> = BTreeMap::new();
    for (lineno, line) in tsv::data_lines(text) {
        let f = tsv::fields(line, 3, lineno)?;
        let d: u64 = f[2]
            .parse()
            .map_err(|_| Error::Parse(format!("line {lineno}: invalid in-degree \"{}\"", f[2])))?;
        out.entry(f[0].to_string()).or_default().insert(f[1].to_string(), d);
    }
    Ok(out)
}

/// Collected list statistics for one user.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ListStats {
    /// L_c(u, t): collected lists mentioning topic t.
    pub collected_topic_lists: BTreeMap<TopicId, f64>,
    /// L_c(u): collected lists.
    pub collected_total: u64,
    /// L(u): lists reported by the user's profile.
    pub profile_total: u64,
}

/// `L_c(u,t) · L(u) / L_c(u)`, zero when nothing was collected.
pub fn estimate_list_feature(stats: &ListStats, topic: &str) -> f64 {
    if stats.collected_total == 0 {
        return 0.0;
    }
    let collected = stats.collected_topic_lists.get(topic).copied().unwrap_or(0.0);
    collected * stats.profile_total as f64 / stats.collected_total as f64
}

/// Builds list stats from MEMBER events. The profile total is the largest
/// reported `listed_total`, or the collected count when none was reported.
pub fn list_stats<'a>(events: impl IntoIterator<Item = &'a EventRecord>, dict: &PhraseDictionary) -> ListStats {
    let mut stats = ListStats::default();
    let mut reported: Option<u64> = None;
    for e in events {
        let Payload::List(l) = &e.payload else { continue };
        if l.role != ListRole::Member {
            continue;
        }
        stats.collected_total += 1;
        reported = reported.max(l.listed_total);
        for (t, _) in dict.topicize(&l.list_name).iter() {
            *stats.collected_topic_lists.entry(t.clone()).or_insert(0.0) += 1.0;
        }
    }
    stats.profile_total = reported.unwrap_or(stats.collected_total);
    stats
}

/// `Σ_j tf(t, doc_j) · n_j` per topic.
pub fn extract_socialwww_feature(docs: &[SharedDocPayload], dict: &PhraseDictionary) -> BTreeMap<TopicId, f64> {
    let mut out = BTreeMap::new();
    for d in docs {
        socialwww_into(&dict.topicize(&d.text), d.reaction_count, &mut out);
    }
    out.retain(|_, v| *v > 0.0);
    out
}

fn socialwww_into(bag: &BagOfTopics, reactions: u64, out: &mut BTreeMap<TopicId, f64>) {
    for (t, tf) in bag.iter() {
        *out.entry(t.clone()).or_insert(0.0) += tf * reactions as f64;
    }
}

/// `tf(t, page) · L_in / max(L_out, 1)` per topic.
pub fn extract_wiki_feature(page: &WikiPagePayload, dict: &PhraseDictionary) -> BTreeMap<TopicId, f64> {
    wiki_from_bag(&dict.topicize(&page.page_text), page.inlinks, page.outlinks)
}

pub fn wiki_value(tf: f64, inlinks: u64, outlinks: u64) -> f64 {
    tf * inlinks as f64 / outlinks.max(1) as f64
}

fn wiki_from_bag(bag: &BagOfTopics, inlinks: u64, outlinks: u64) -> BTreeMap<TopicId, f64> {
    bag.iter()
        .map(|(t, tf)| (t.clone(), wiki_value(tf, inlinks, outlinks)))
        .filter(|(_, v)| *v > 0.0)
        .collect()
}

/// Base topic strength used by graph features: each user's own generated
/// text (message text, page text and hashtags, all networks).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphTopicStrength {
    pub strength: BTreeMap<UserId, BTreeMap<TopicId, f64>>,
    pub global_total: BTreeMap<TopicId, f64>,
}

impl GraphTopicStrength {
    pub fn from_store(store: &FeatureStore) -> Self {
        let base: Vec<FeatureId> = FeatureId::all()
            .filter(|f| {
                f.attribution() == Attribution::Generated
                    && matches!(f.source(), Source::MsgText | Source::PageText | Source::Hashtag)
            })
            .collect();
        let mut out = GraphTopicStrength::default();
        for (u, t, row) in store.rows() {
            let s: f64 = base.iter().map(|f| row[f.index()]).sum();
            if s > 0.0 {
                out.strength.entry(u.clone()).or_default().insert(t.clone(), s);
                *out.global_total.entry(t.clone()).or_insert(0.0) += s;
            }
        }
        out
    }

    pub fn get(&self, user: &str, topic: &str) -> f64 {
        self.strength
            .get(user)
            .and_then(|m| m.get(topic))
            .copied()
            .unwrap_or(0.0)
    }
}

/// Graph feature for one subject: neighbor strengths summed per topic and
/// scaled by the population total. Duplicate neighbors count once.
pub fn extract_graph_feature<'a>(
    neighbors: impl IntoIterator<Item = &'a UserId>,
    strengths: &GraphTopicStrength,
) -> BTreeMap<TopicId, f64> {
    let unique: BTreeSet<&UserId> = neighbors.into_iter().collect();
    let mut sums: BTreeMap<TopicId, f64> = BTreeMap::new();
    for v in unique {
        if let Some(topics) = strengths.strength.get(v) {
            for (t, s) in topics {
                *sums.entry(t.clone()).or_insert(0.0) += s;
            }
        }
    }
    sums.into_iter()
        .filter_map(|(t, s)| {
            let total = strengths.global_total.get(&t).copied().unwrap_or(0.0);
            (total > 0.0 && s > 0.0).then(|| (t, s / total))
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractReport {
    pub events: usize,
    pub users: usize,
    /// Events whose triple is not registered.
    pub skipped: usize,
    /// Industry fields with zero industry followers.
    pub degenerate: usize,
}

pub struct Extraction {
    pub store: FeatureStore,
    pub connectivity: BTreeMap<UserId, ConnectivityVector>,
    pub report: ExtractReport,
}

struct UserPartial {
    user: UserId,
    rows: BTreeMap<TopicId, FeatureRow>,
    edges: BTreeMap<FeatureId, BTreeSet<UserId>>,
    skipped: usize,
    degenerate: usize,
}

fn add_bag(rows: &mut BTreeMap<TopicId, FeatureRow>, f: FeatureId, bag: impl IntoIterator<Item = (TopicId, f64)>) {
    for (t, v) in bag {
        if v > 0.0 {
            rows.entry(t).or_insert([0.0; CATALOG_LEN])[f.index()] += v;
        }
    }
}

fn extract_user(user: &UserId, events: &[EventRecord], dict: &PhraseDictionary) -> UserPartial {
    let mut p = UserPartial {
        user: user.clone(),
        rows: BTreeMap::new(),
        edges: BTreeMap::new(),
        skipped: 0,
        degenerate: 0,
    };
    let mut member_lists: Vec<&EventRecord> = Vec::new();
    let mut list_feature = None;
    for e in events {
        let Some(f) = e.feature_id() else {
            p.skipped += 1;
            continue;
        };
        match &e.payload {
            Payload::Message(m) => {
                let bag = if m.source_tag == Source::Hashtag {
                    dict.topicize(&expand_hashtags(&m.text))
                } else {
                    dict.topicize(&m.text)
                };
                add_bag(&mut p.rows, f, bag.iter().map(|(t, w)| (t.clone(), w)));
            }
            Payload::List(l) => match l.role {
                ListRole::Member => {
                    member_lists.push(e);
                    list_feature = Some(f);
                }
                ListRole::Creator | ListRole::Subscriber => {
                    let bag = dict.topicize(&l.list_name);
                    add_bag(&mut p.rows, f, bag.iter().map(|(t, w)| (t.clone(), w)));
                }
            },
            Payload::Profile(pr) => {
                let bag = dict.topicize(&pr.text);
                let scale = match pr.field {
                    ProfileField::Skill => 1.0,
                    ProfileField::Industry => {
                        if pr.industry_followers == 0 {
                            p.degenerate += 1;
                            0.0
                        } else {
                            pr.company_followers as f64 / pr.industry_followers as f64
                        }
                    }
                };
                add_bag(&mut p.rows, f, bag.iter().map(|(t, w)| (t.clone(), w * scale)));
            }
            Payload::GraphEdge(GraphEdgePayload { actor_user, .. }) => {
                p.edges.entry(f).or_default().insert(actor_user.clone());
            }
            Payload::SharedDoc(d) => {
                let mut per_topic = BTreeMap::new();
                socialwww_into(&dict.topicize(&d.text), d.reaction_count, &mut per_topic);
                add_bag(&mut p.rows, f, per_topic);
            }
            Payload::WikiPage(w) => {
                add_bag(&mut p.rows, f, wiki_from_bag(&dict.topicize(&w.page_text), w.inlinks, w.outlinks));
            }
        }
    }
    if let Some(f) = list_feature {
        let stats = list_stats(member_lists, dict);
        let estimates: Vec<(TopicId, f64)> = stats
            .collected_topic_lists
            .keys()
            .map(|t| (t.clone(), estimate_list_feature(&stats, t)))
            .collect();
        add_bag(&mut p.rows, f, estimates);
    }
    p
}

/// Extracts the full raw catalog for every user.
///
/// Non-graph features depend only on the subject's own events and are
/// computed per user in parallel; graph features are a second pass over the
/// resulting topic strengths. Per-user sums follow event file order.
pub fn extract(events: &[EventRecord], dict: &PhraseDictionary) -> Extraction {
    let groups = partition_by_user(events.iter().cloned());
    let groups: Vec<(&UserId, &Vec<EventRecord>)> = groups.iter().collect();
    let partials: Vec<UserPartial> = groups
        .par_iter()
        .map(|(u, evs)| extract_user(u, evs, dict))
        .collect();

    let mut report = ExtractReport {
        events: events.len(),
        users: partials.len(),
        ..Default::default()
    };
    let mut store = FeatureStore::new();
    store.reference_ts = events.iter().map(|e| e.timestamp).max();
    let mut connectivity: BTreeMap<UserId, ConnectivityVector> = BTreeMap::new();
    for p in &partials {
        report.skipped += p.skipped;
        report.degenerate += p.degenerate;
        for (f, actors) in &p.edges {
            if let Some(g) = indegree_graph(f.network(), f.source()) {
                connectivity
                    .entry(p.user.clone())
                    .or_default()
                    .insert(g.to_string(), actors.len() as u64);
            }
        }
    }

    let strengths = GraphTopicStrength::from_store(&{
        let mut text_only = FeatureStore::new();
        for p in &partials {
            for (t, row) in &p.rows {
                text_only.insert_row(p.user.clone(), t.clone(), *row);
            }
        }
        text_only
    });

    let finished: Vec<(UserId, BTreeMap<TopicId, FeatureRow>)> = partials
        .into_par_iter()
        .map(|mut p| {
            for (f, actors) in &p.edges {
                add_bag(&mut p.rows, *f, extract_graph_feature(actors, &strengths));
            }
            (p.user, p.rows)
        })
        .collect();
    for (u, rows) in finished {
        for (t, row) in rows {
            store.insert_row(u.clone(), t, row);
        }
    }
    Extraction {
        store,
        connectivity,
        report,
    }
}
