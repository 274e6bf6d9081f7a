//! Seeded synthetic corpus with planted expertise.
//!
//! Every user gets a latent expertise level in a few topics and an unrelated
//! "chatter" profile. Each network mixes the two with its own `signal` and
//! `chatter` strengths, so a network with zero signal produces topical
//! activity that carries no information about expertise. Connectivity follows
//! a power law; ground-truth lists are latent orders perturbed by a Mallows
//! model whose expected pairwise disagreement equals the configured noise.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Pareto, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use expertise::features::{connectivity_to_tsv, ConnectivityVector};
use expertise::groundtruth::{Label, PairLabel, SortedEvaluation};
use expertise::ingest::{
    write_events, EdgeSet, EventRecord, GraphEdgePayload, ListPayload, ListRole, MessagePayload, Payload,
    ProfileField, ProfilePayload, SharedDocPayload, WikiPagePayload,
};
use expertise::ontology::{Level, PhraseDictionary, TopicNode, TopicOntology};
use expertise::{catalog, tsv, Attribution, FeatureId, Network, Source, TopicId, UserId};

use crate::files;
use crate::StageError;

/// Newest possible event time (2015-07-12T00:00:00Z).
pub const REFERENCE_TS: i64 = 1_436_659_200;
const MAX_MENTIONS: u64 = 60;
const MENTIONS_PER_EVENT: u64 = 4;

const STREAM_ONTOLOGY: u64 = 0;
const STREAM_GROUNDTRUTH: u64 = 1;
const STREAM_GRAPH: u64 = 2;
const STREAM_USERS: u64 = 16;

const TOPIC_NAMES: [(&str, &str); 24] = [
    ("politics", "news"),
    ("journalism", "news"),
    ("software", "technology"),
    ("astronomy", "science"),
    ("basketball", "sports"),
    ("music", "arts"),
    ("cooking", "lifestyle"),
    ("economics", "news"),
    ("robotics", "technology"),
    ("chemistry", "science"),
    ("soccer", "sports"),
    ("film", "arts"),
    ("travel", "lifestyle"),
    ("machine learning", "technology"),
    ("climate change", "science"),
    ("tennis", "sports"),
    ("photography", "arts"),
    ("fashion", "lifestyle"),
    ("gaming", "technology"),
    ("medicine", "science"),
    ("cycling", "sports"),
    ("literature", "arts"),
    ("wine tasting", "lifestyle"),
    ("architecture", "arts"),
];

const FILLER: [&str; 24] = [
    "today", "great", "thoughts", "on", "the", "new", "read", "this", "about", "big", "day", "for", "really",
    "enjoyed", "some", "notes", "from", "check", "out", "latest", "what", "a", "week", "again",
];

const LIST_WORDS: [&str; 4] = ["experts", "people", "voices", "insiders"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    /// Probability that a user is active on the network.
    pub presence: f64,
    /// Weight of latent expertise in topical activity.
    pub signal: f64,
    /// Weight of expertise-independent topical chatter.
    pub chatter: f64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec { presence: 0.5, signal: 1.0, chatter: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub users: usize,
    pub topics: usize,
    /// Exponent α of the connectivity density `p(C) ∝ C^-α`.
    pub connectivity_exponent: f64,
    pub min_connectivity: f64,
    pub max_topics_per_user: usize,
    /// Expected topical mentions per feature at unit strength.
    pub mention_rate: f64,
    /// Expected fraction of discordant pairs in each evaluator's list.
    pub label_noise: f64,
    pub lists_per_topic: usize,
    pub list_length: usize,
    pub evaluators_per_list: usize,
    pub follows_per_user: usize,
    /// Events are spread over this many days before the reference time.
    pub span_days: u32,
    pub networks: BTreeMap<String, NetworkSpec>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let net = |presence, signal, chatter| NetworkSpec { presence, signal, chatter };
        SynthConfig {
            users: 100,
            topics: 3,
            connectivity_exponent: 2.0,
            min_connectivity: 10.0,
            max_topics_per_user: 3,
            mention_rate: 6.0,
            label_noise: 0.16,
            lists_per_topic: 20,
            list_length: 8,
            evaluators_per_list: 3,
            follows_per_user: 8,
            span_days: 120,
            networks: BTreeMap::from([
                ("TW".to_string(), net(1.0, 1.0, 0.15)),
                ("FB".to_string(), net(0.6, 0.7, 0.2)),
                ("FB_PAGE".to_string(), net(0.15, 0.8, 0.15)),
                ("GP".to_string(), net(0.25, 0.0, 1.0)),
                ("LI".to_string(), net(0.4, 0.6, 0.15)),
                ("WIKI".to_string(), net(0.05, 1.0, 0.1)),
            ]),
        }
    }
}

impl SynthConfig {
    pub fn load(path: &Path) -> Result<Self, StageError> {
        let text = tsv::read_to_string(path)?;
        let cfg: SynthConfig = serde_json::from_str(&text)
            .map_err(|e| StageError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), StageError> {
        let bad = |msg: String| Err(StageError::Config(msg));
        if self.users < 2 {
            return bad(format!("users must be at least 2, got {}", self.users));
        }
        if self.topics == 0 {
            return bad("topics must be at least 1".into());
        }
        if !(self.connectivity_exponent > 1.0 && self.connectivity_exponent.is_finite()) {
            return bad(format!("connectivity_exponent must exceed 1, got {}", self.connectivity_exponent));
        }
        if !(self.min_connectivity >= 1.0 && self.min_connectivity.is_finite()) {
            return bad(format!("min_connectivity must be at least 1, got {}", self.min_connectivity));
        }
        if self.max_topics_per_user == 0 || self.max_topics_per_user > self.topics {
            return bad(format!(
                "max_topics_per_user must be in 1..={}, got {}",
                self.topics, self.max_topics_per_user
            ));
        }
        if !(self.mention_rate > 0.0 && self.mention_rate.is_finite()) {
            return bad(format!("mention_rate must be positive, got {}", self.mention_rate));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return bad(format!("label_noise must be in [0, 0.5), got {}", self.label_noise));
        }
        if self.list_length < 2 {
            return bad(format!("list_length must be at least 2, got {}", self.list_length));
        }
        if self.evaluators_per_list == 0 {
            return bad("evaluators_per_list must be at least 1".into());
        }
        for (name, spec) in &self.networks {
            if name.parse::<Network>().is_err() {
                return bad(format!("unknown network \"{name}\" in networks"));
            }
            if !(0.0..=1.0).contains(&spec.presence) {
                return bad(format!("{name}.presence must be in [0, 1], got {}", spec.presence));
            }
            for (field, v) in [("signal", spec.signal), ("chatter", spec.chatter)] {
                if !(v >= 0.0 && v.is_finite()) {
                    return bad(format!("{name}.{field} must be non-negative, got {v}"));
                }
            }
        }
        Ok(())
    }

    fn network(&self, n: Network) -> Option<&NetworkSpec> {
        self.networks.get(n.as_str())
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Connectivity draws from `p(C) ∝ C^-α` on `[c_min, ∞)`, capped at 10^8.
pub fn sample_connectivity<R: Rng>(rng: &mut R, exponent: f64, c_min: f64) -> f64 {
    let pareto = Pareto::new(c_min, exponent - 1.0).expect("validated exponent");
    pareto.sample(rng).min(1e8)
}

/// Expected inversions of a Mallows permutation of `n` items.
pub fn mallows_expected_inversions(n: usize, phi: f64) -> f64 {
    let mut total = 0.0;
    for i in 1..n {
        let (mut num, mut den, mut p) = (0.0, 0.0, 1.0);
        for k in 0..=i {
            num += k as f64 * p;
            den += p;
            p *= phi;
        }
        total += num / den;
    }
    total
}

/// Dispersion whose expected discordant-pair fraction equals `noise`.
pub fn mallows_phi(n: usize, noise: f64) -> f64 {
    if noise <= 0.0 || n < 2 {
        return 0.0;
    }
    let target = noise * (n * (n - 1) / 2) as f64;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mallows_expected_inversions(n, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Repeated-insertion sampling around the reference order `items`.
pub fn mallows_permutation<T: Clone, R: Rng>(items: &[T], phi: f64, rng: &mut R) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let mut weights = Vec::with_capacity(i + 1);
        let mut p = 1.0;
        for _ in 0..=i {
            weights.push(p);
            p *= phi;
        }
        let inversions = if phi == 0.0 {
            0
        } else {
            WeightedIndex::new(&weights).expect("positive weights").sample(rng)
        };
        out.insert(i - inversions, item.clone());
    }
    out
}

/// Per-vote accuracy `p` whose expected two-vote majority fraction
/// `1 - p(1-p)` equals `agreement`.
pub fn vote_accuracy(agreement: f64) -> Result<f64, StageError> {
    if !(0.75..=1.0).contains(&agreement) {
        return Err(StageError::Config(format!(
            "two-vote agreement must be in [0.75, 1], got {agreement}"
        )));
    }
    Ok(0.5 * (1.0 + (4.0 * agreement - 3.0).sqrt()))
}

/// `pairs` distinct pairs, each judged by `votes` independent evaluators who
/// follow the hidden order (`u1` ahead) with the accuracy implied by
/// `agreement`.
pub fn synth_votes(pairs: usize, votes: usize, agreement: f64, seed: u64) -> Result<Vec<PairLabel>, StageError> {
    let p = vote_accuracy(agreement)?;
    let mut rng = stream_rng(seed, STREAM_GROUNDTRUTH);
    let mut out = Vec::with_capacity(pairs * votes);
    for i in 0..pairs {
        for v in 0..votes {
            let label = if rng.random::<f64>() < p { Label::Up } else { Label::Down };
            out.push(PairLabel {
                u1: format!("a{i:07}"),
                u2: format!("b{i:07}"),
                topic: "t".to_string(),
                label,
                evaluator: format!("ev{v:02}"),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct Profile {
    id: UserId,
    connectivity: f64,
    expertise: BTreeMap<usize, f64>,
    chatter: BTreeMap<usize, f64>,
    networks: BTreeSet<Network>,
}

pub struct Dataset {
    pub config: SynthConfig,
    pub seed: u64,
    pub ontology: TopicOntology,
    pub dictionary: PhraseDictionary,
    /// Scored topic ids, in generation order.
    pub topics: Vec<TopicId>,
    pub events: Vec<EventRecord>,
    pub groundtruth: Vec<SortedEvaluation>,
    pub connectivity: BTreeMap<UserId, ConnectivityVector>,
    pub latent: BTreeMap<(UserId, TopicId), f64>,
    pub handles: BTreeMap<UserId, String>,
}

fn topic_name(i: usize) -> (String, &'static str) {
    match TOPIC_NAMES.get(i) {
        Some((name, sup)) => (name.to_string(), sup),
        None => (format!("topic {i}"), TOPIC_NAMES[i % TOPIC_NAMES.len()].1),
    }
}

fn title_case(s: &str) -> String {
    s.split(' ')
        .map(|w| {
            let mut c = w.chars();
            match c.next() {
                Some(f) => f.to_uppercase().chain(c).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn build_ontology(n: usize, seed: u64) -> Result<(TopicOntology, PhraseDictionary, Vec<TopicId>), StageError> {
    let mut rng = stream_rng(seed, STREAM_ONTOLOGY);
    let mut used = BTreeSet::new();
    let mut fresh_id = |rng: &mut ChaCha8Rng| loop {
        let id = (rng.random::<u64>() >> 1).to_string();
        if used.insert(id.clone()) {
            return id;
        }
    };
    let mut supers: BTreeMap<&str, TopicId> = BTreeMap::new();
    let mut nodes = Vec::new();
    let mut topics = Vec::new();
    let mut phrases = Vec::new();
    for i in 0..n {
        let (name, sup) = topic_name(i);
        let parent = match supers.get(sup) {
            Some(id) => id.clone(),
            None => {
                let id = fresh_id(&mut rng);
                nodes.push(TopicNode {
                    id: id.clone(),
                    slug: sup.to_string(),
                    display_name: title_case(sup),
                    level: Level::Super,
                    parent_id: None,
                });
                supers.insert(sup, id.clone());
                id
            }
        };
        let id = fresh_id(&mut rng);
        nodes.push(TopicNode {
            id: id.clone(),
            slug: name.replace(' ', "-"),
            display_name: title_case(&name),
            level: Level::Sub,
            parent_id: Some(parent),
        });
        phrases.push((name, id.clone()));
        topics.push(id);
    }
    let ontology = TopicOntology::new(nodes)?;
    let mut dictionary = PhraseDictionary::new();
    for (phrase, id) in &phrases {
        dictionary.insert(phrase, id, 1.0, &ontology)?;
    }
    Ok((ontology, dictionary, topics))
}

fn filler<R: Rng>(rng: &mut R, words: usize) -> String {
    (0..words).map(|_| *FILLER.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn sentence<R: Rng>(rng: &mut R, phrase: &str, mentions: u64) -> String {
    let mut parts = Vec::new();
    for _ in 0..mentions {
        let n = rng.random_range(1..=3);
        parts.push(filler(rng, n));
        parts.push(phrase.to_string());
    }
    let n = rng.random_range(0..=2);
    parts.push(filler(rng, n));
    parts.retain(|p| !p.is_empty());
    parts.join(" ")
}

fn hashtags<R: Rng>(rng: &mut R, phrase: &str, mentions: u64) -> String {
    let tag: String = format!("#{}", title_case(phrase).replace(' ', ""));
    let mut parts = vec![filler(rng, 2)];
    for _ in 0..mentions {
        parts.push(tag.clone());
    }
    parts.join(" ")
}

fn poisson<R: Rng>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    (Poisson::new(lambda).expect("positive rate").sample(rng) as u64).min(MAX_MENTIONS)
}

fn timestamp<R: Rng>(rng: &mut R, span_days: u32) -> i64 {
    REFERENCE_TS - rng.random_range(0..=i64::from(span_days) * 86_400)
}

fn make_profile(cfg: &SynthConfig, seed: u64, index: usize, width: usize) -> (Profile, ChaCha8Rng) {
    let mut rng = stream_rng(seed, STREAM_USERS + index as u64);
    let id = format!("u{index:0width$}");
    let connectivity = sample_connectivity(&mut rng, cfg.connectivity_exponent, cfg.min_connectivity);
    let reach = 1.0 + 0.1 * (connectivity / cfg.min_connectivity).log10();
    let k = rng.random_range(1..=cfg.max_topics_per_user);
    let all: Vec<usize> = (0..cfg.topics).collect();
    let expertise = all
        .choose_multiple(&mut rng, k)
        .map(|&t| {
            let e: f64 = Exp1.sample(&mut rng);
            (t, reach * (0.05 + e))
        })
        .collect();
    let c = rng.random_range(1..=cfg.max_topics_per_user.min(2));
    let chatter = all
        .choose_multiple(&mut rng, c)
        .map(|&t| {
            let e: f64 = Exp1.sample(&mut rng);
            (t, e)
        })
        .collect();
    let networks = Network::ALL
        .iter()
        .copied()
        .filter(|&n| cfg.network(n).is_some_and(|s| rng.random::<f64>() < s.presence))
        .collect();
    (Profile { id, connectivity, expertise, chatter, networks }, rng)
}

fn content_events(
    p: &Profile,
    cfg: &SynthConfig,
    phrases: &[String],
    rng: &mut ChaCha8Rng,
) -> Vec<EventRecord> {
    let mut out = Vec::new();
    let ev = |network, attribution, ts, payload| EventRecord {
        network,
        attribution,
        subject_user: p.id.clone(),
        timestamp: ts,
        payload,
    };
    for &net in &p.networks {
        let spec = cfg.network(net).expect("present networks are configured");
        let topics: BTreeSet<usize> = p.expertise.keys().chain(p.chatter.keys()).copied().collect();
        let strength = |t: usize| {
            spec.signal * p.expertise.get(&t).copied().unwrap_or(0.0)
                + spec.chatter * p.chatter.get(&t).copied().unwrap_or(0.0)
        };
        let mut member_lists: Vec<(String, i64)> = Vec::new();
        let mut wiki_text = Vec::new();
        for f in catalog::network_features(net) {
            if f.attribution() == Attribution::Graph {
                continue;
            }
            for &t in &topics {
                let mentions = poisson(rng, cfg.mention_rate * strength(t));
                if mentions == 0 {
                    continue;
                }
                let phrase = &phrases[t];
                push_feature_events(f, phrase, mentions, p, cfg, rng, &mut out, &mut member_lists, &mut wiki_text, &ev);
            }
        }
        if !member_lists.is_empty() {
            let listed_total = member_lists.len() as u64 * 2;
            for (name, ts) in member_lists {
                out.push(ev(
                    net,
                    Attribution::Credited,
                    ts,
                    Payload::List(ListPayload { list_name: name, role: ListRole::Member, listed_total: Some(listed_total) }),
                ));
            }
        }
        if !wiki_text.is_empty() {
            let ts = timestamp(rng, cfg.span_days);
            let inlinks = (p.connectivity / 50.0).ceil() as u64;
            let outlinks = 1 + poisson(rng, 20.0);
            out.push(ev(
                net,
                Attribution::Generated,
                ts,
                Payload::WikiPage(WikiPagePayload { page_text: wiki_text.join(" "), inlinks, outlinks }),
            ));
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn push_feature_events(
    f: FeatureId,
    phrase: &str,
    mentions: u64,
    p: &Profile,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<EventRecord>,
    member_lists: &mut Vec<(String, i64)>,
    wiki_text: &mut Vec<String>,
    ev: &impl Fn(Network, Attribution, i64, Payload) -> EventRecord,
) {
    let (net, attr) = (f.network(), f.attribution());
    match f.source() {
        Source::MsgText | Source::PageText | Source::Url | Source::UrlMeta | Source::Hashtag => {
            let mut left = mentions;
            while left > 0 {
                let k = left.min(rng.random_range(1..=MENTIONS_PER_EVENT));
                left -= k;
                let text = if f.source() == Source::Hashtag {
                    hashtags(rng, phrase, k)
                } else {
                    sentence(rng, phrase, k)
                };
                let ts = timestamp(rng, cfg.span_days);
                out.push(ev(net, attr, ts, Payload::Message(MessagePayload { text, source_tag: f.source() })));
            }
        }
        Source::List => {
            for _ in 0..mentions {
                let name = format!("{phrase} {}", LIST_WORDS.choose(rng).unwrap());
                let ts = timestamp(rng, cfg.span_days);
                if attr == Attribution::Credited {
                    member_lists.push((name, ts));
                } else {
                    let payload = ListPayload { list_name: name, role: ListRole::Creator, listed_total: None };
                    out.push(ev(net, attr, ts, Payload::List(payload)));
                }
            }
        }
        Source::Skills | Source::Industry => {
            let field = if f.source() == Source::Skills { ProfileField::Skill } else { ProfileField::Industry };
            let ts = timestamp(rng, cfg.span_days);
            let text = vec![phrase; mentions as usize].join(", ");
            let payload = ProfilePayload {
                field,
                text,
                company_followers: 50 + poisson(rng, 50.0),
                industry_followers: 100,
            };
            out.push(ev(net, attr, ts, Payload::Profile(payload)));
        }
        Source::SocialWww => {
            for k in 0..mentions {
                let ts = timestamp(rng, cfg.span_days);
                let payload = SharedDocPayload {
                    doc_id: format!("{}-{}-{k}", p.id, phrase.replace(' ', "-")),
                    text: sentence(rng, phrase, 1),
                    reaction_count: 1 + poisson(rng, 4.0),
                };
                out.push(ev(net, attr, ts, Payload::SharedDoc(payload)));
            }
        }
        Source::WikiInout => {
            for _ in 0..mentions {
                wiki_text.push(sentence(rng, phrase, 1));
            }
        }
        Source::Followers | Source::Following | Source::Friends => {}
    }
}

fn graph_events(profiles: &[Profile], cfg: &SynthConfig, seed: u64) -> Vec<EventRecord> {
    let mut rng = stream_rng(seed, STREAM_GRAPH);
    let mut out = Vec::new();
    let edge = |subject: &str, actor: &str, network, edge_set, ts| EventRecord {
        network,
        attribution: Attribution::Graph,
        subject_user: subject.to_string(),
        timestamp: ts,
        payload: Payload::GraphEdge(GraphEdgePayload { actor_user: actor.to_string(), edge_set }),
    };
    for (net, sets, per_user) in [
        (Network::Twitter, (EdgeSet::Followers, Some(EdgeSet::Following)), cfg.follows_per_user),
        (Network::Facebook, (EdgeSet::Friends, None), cfg.follows_per_user / 2),
    ] {
        let members: Vec<usize> = (0..profiles.len()).filter(|&i| profiles[i].networks.contains(&net)).collect();
        let pools: Vec<Vec<(usize, f64)>> = (0..cfg.topics)
            .map(|t| {
                members
                    .iter()
                    .filter_map(|&i| profiles[i].expertise.get(&t).map(|&x| (i, x)))
                    .collect()
            })
            .collect();
        for &v in &members {
            let interests: Vec<usize> =
                profiles[v].expertise.keys().chain(profiles[v].chatter.keys()).copied().collect();
            let mut chosen = BTreeSet::new();
            for _ in 0..per_user {
                let t = *interests.choose(&mut rng).unwrap();
                let pool = &pools[t];
                if pool.is_empty() {
                    continue;
                }
                let w = WeightedIndex::new(pool.iter().map(|e| e.1)).expect("positive expertise");
                let target = pool[w.sample(&mut rng)].0;
                if target != v {
                    chosen.insert(target);
                }
            }
            for target in chosen {
                let ts = timestamp(&mut rng, cfg.span_days.min(30));
                let (a, b) = (&profiles[target].id, &profiles[v].id);
                out.push(edge(a, b, net, sets.0, ts));
                match sets.1 {
                    Some(back) => out.push(edge(b, a, net, back, ts)),
                    None => out.push(edge(b, a, net, sets.0, ts)),
                }
            }
        }
    }
    out
}

fn split_connectivity<R: Rng>(p: &Profile, rng: &mut R) -> ConnectivityVector {
    let c = p.connectivity;
    let mut v = ConnectivityVector::new();
    if p.networks.contains(&Network::Facebook) {
        let theta = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
        v.insert("TW_FOLLOWERS".to_string(), (c * theta.cos()).round() as u64);
        v.insert("FB_FRIENDS".to_string(), (c * theta.sin()).round() as u64);
    } else {
        v.insert("TW_FOLLOWERS".to_string(), c.round() as u64);
    }
    v
}

fn ground_truth(profiles: &[Profile], topics: &[TopicId], cfg: &SynthConfig, seed: u64) -> Vec<SortedEvaluation> {
    let mut rng = stream_rng(seed, STREAM_GROUNDTRUTH);
    let mut out = Vec::new();
    for (t, topic) in topics.iter().enumerate() {
        let pool: Vec<usize> = (0..profiles.len()).filter(|&i| profiles[i].expertise.contains_key(&t)).collect();
        if pool.len() < 2 {
            continue;
        }
        let n = cfg.list_length.min(pool.len());
        let phi = mallows_phi(n, cfg.label_noise);
        for _ in 0..cfg.lists_per_topic {
            let mut members: Vec<usize> = pool.choose_multiple(&mut rng, n).copied().collect();
            members.sort_by(|&a, &b| {
                profiles[b].expertise[&t]
                    .total_cmp(&profiles[a].expertise[&t])
                    .then_with(|| profiles[a].id.cmp(&profiles[b].id))
            });
            let ids: Vec<UserId> = members.iter().map(|&i| profiles[i].id.clone()).collect();
            for e in 0..cfg.evaluators_per_list {
                out.push(SortedEvaluation {
                    evaluator: format!("ev{e:02}"),
                    topic: topic.clone(),
                    sorted: mallows_permutation(&ids, phi, &mut rng),
                    unsortable: Vec::new(),
                });
            }
        }
    }
    out
}

pub fn generate(cfg: &SynthConfig, seed: u64) -> Result<Dataset, StageError> {
    cfg.validate()?;
    let (ontology, dictionary, topics) = build_ontology(cfg.topics, seed)?;
    let phrases: Vec<String> = (0..cfg.topics).map(|i| topic_name(i).0).collect();
    let width = cfg.users.to_string().len().max(5);
    let generated: Vec<(Profile, Vec<EventRecord>, ConnectivityVector)> = (0..cfg.users)
        .into_par_iter()
        .map(|i| {
            let (p, mut rng) = make_profile(cfg, seed, i, width);
            let conn = split_connectivity(&p, &mut rng);
            let events = content_events(&p, cfg, &phrases, &mut rng);
            (p, events, conn)
        })
        .collect();
    let mut events = Vec::new();
    let mut connectivity = BTreeMap::new();
    let mut latent = BTreeMap::new();
    let mut handles = BTreeMap::new();
    let mut profiles = Vec::with_capacity(generated.len());
    for (p, evs, conn) in generated {
        events.extend(evs);
        connectivity.insert(p.id.clone(), conn);
        for (&t, &x) in &p.expertise {
            latent.insert((p.id.clone(), topics[t].clone()), x);
        }
        handles.insert(p.id.clone(), format!("user_{}", &p.id[1..]));
        profiles.push(p);
    }
    events.extend(graph_events(&profiles, cfg, seed));
    let groundtruth = ground_truth(&profiles, &topics, cfg, seed);
    Ok(Dataset {
        config: cfg.clone(),
        seed,
        ontology,
        dictionary,
        topics,
        events,
        groundtruth,
        connectivity,
        latent,
        handles,
    })
}

pub fn latent_to_tsv(latent: &BTreeMap<(UserId, TopicId), f64>) -> String {
    let mut out = String::from("# user\ttopic\texpertise\n");
    for ((u, t), x) in latent {
        out.push_str(&format!("{u}\t{t}\t{x}\n"));
    }
    out
}

pub fn parse_latent(text: &str) -> expertise::Result<BTreeMap<(UserId, TopicId), f64>> {
    tsv::data_lines(text)
        .map(|(lineno, line)| {
            let f = tsv::fields(line, 3, lineno)?;
            Ok(((f[0].to_string(), f[1].to_string()), tsv::parse_f64(f[2], lineno)?))
        })
        .collect()
}

pub fn handles_to_tsv(handles: &BTreeMap<UserId, String>) -> String {
    let mut out = String::from("# user\thandle\n");
    for (u, h) in handles {
        out.push_str(&format!("{u}\t{h}\n"));
    }
    out
}

pub fn parse_handles(text: &str) -> expertise::Result<BTreeMap<UserId, String>> {
    tsv::data_lines(text)
        .map(|(lineno, line)| {
            let f = tsv::fields(line, 2, lineno)?;
            Ok((f[0].to_string(), f[1].to_string()))
        })
        .collect()
}

impl Dataset {
    pub fn write(&self, dir: &Path) -> Result<(), StageError> {
        tsv::write(&dir.join(files::ONTOLOGY), &self.ontology.to_tsv())?;
        tsv::write(&dir.join(files::DICTIONARY), &self.dictionary.to_tsv())?;
        write_events(&dir.join(files::EVENTS), &self.events)?;
        let mut gt = String::from("# evaluator\ttopic\tsorted\tunsortable\n");
        for e in &self.groundtruth {
            gt.push_str(&e.to_line());
            gt.push('\n');
        }
        tsv::write(&dir.join(files::GROUNDTRUTH), &gt)?;
        tsv::write(&dir.join(files::CONNECTIVITY), &connectivity_to_tsv(&self.connectivity))?;
        tsv::write(&dir.join(files::LATENT), &latent_to_tsv(&self.latent))?;
        tsv::write(&dir.join(files::USERS), &handles_to_tsv(&self.handles))?;
        let cfg = serde_json::json!({ "seed": self.seed, "config": self.config });
        let text = serde_json::to_string_pretty(&cfg).expect("config serializes") + "\n";
        tsv::write(&dir.join(files::SYNTH_CONFIG), &text)?;
        Ok(())
    }
}
