#![allow(dead_code)]

use expertise::ingest::{
    EdgeSet, EventRecord, GraphEdgePayload, ListPayload, ListRole, MessagePayload, Payload, ProfileField,
    ProfilePayload, SharedDocPayload, WikiPagePayload,
};
use expertise::ontology::{Level, PhraseDictionary, TopicNode, TopicOntology};
use expertise::{Attribution, Network, Source};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const WORDS: &[&str] = &[
    "rust", "compilers", "jazz", "sushi", "tennis", "machine", "learning", "the", "a", "today", "great",
];

/// Flat ontology of super topics `T0..T{n-1}`.
pub fn flat_ontology(n: usize) -> TopicOntology {
    TopicOntology::new((0..n).map(|i| TopicNode {
        id: format!("T{i}"),
        slug: format!("t{i}"),
        display_name: format!("Topic {i}"),
        level: Level::Super,
        parent_id: None,
    }))
    .unwrap()
}

/// Dictionary over [`WORDS`]: a few single words plus "machine learning".
pub fn word_dictionary(ont: &TopicOntology) -> PhraseDictionary {
    let mut d = PhraseDictionary::new();
    for (p, t) in [
        ("rust", "T0"),
        ("compilers", "T0"),
        ("machine learning", "T1"),
        ("jazz", "T2"),
        ("sushi", "T3"),
        ("tennis", "T3"),
    ] {
        d.insert(p, t, 1.0, ont).unwrap();
    }
    d
}

pub fn random_text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..10);
    (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

fn user(rng: &mut ChaCha8Rng, users: usize) -> String {
    format!("u{}", rng.random_range(0..users))
}

/// Random valid events of every kind over users `u0..`.
pub fn random_event(rng: &mut ChaCha8Rng, users: usize) -> EventRecord {
    let subject = user(rng, users);
    let ts = rng.random_range(1_000..2_000);
    let (network, attribution, payload) = match rng.random_range(0..8) {
        0 | 1 => {
            let net = [Network::Twitter, Network::Facebook, Network::GooglePlus][rng.random_range(0..3)];
            let attr = [Attribution::Generated, Attribution::Reacted][rng.random_range(0..2)];
            (net, attr, Payload::Message(MessagePayload { text: random_text(rng), source_tag: Source::MsgText }))
        }
        2 => (
            Network::Twitter,
            Attribution::Generated,
            Payload::Message(MessagePayload { text: random_text(rng), source_tag: Source::Hashtag }),
        ),
        3 => (
            Network::Twitter,
            Attribution::Credited,
            Payload::List(ListPayload {
                list_name: random_text(rng),
                role: ListRole::Member,
                listed_total: Some(rng.random_range(0..20)),
            }),
        ),
        4 => (
            Network::LinkedIn,
            Attribution::Generated,
            Payload::Profile(ProfilePayload {
                field: ProfileField::Skill,
                text: random_text(rng),
                company_followers: 0,
                industry_followers: 0,
            }),
        ),
        5 => {
            let mut actor = user(rng, users);
            if actor == subject {
                actor.push('x');
            }
            (
                Network::Twitter,
                Attribution::Graph,
                Payload::GraphEdge(GraphEdgePayload { actor_user: actor, edge_set: EdgeSet::Followers }),
            )
        }
        6 => (
            Network::Twitter,
            Attribution::Generated,
            Payload::SharedDoc(SharedDocPayload {
                doc_id: format!("d{}", rng.random_range(0..1000)),
                text: random_text(rng),
                reaction_count: rng.random_range(0..50),
            }),
        ),
        _ => (
            Network::Wikipedia,
            Attribution::Generated,
            Payload::WikiPage(WikiPagePayload {
                page_text: random_text(rng),
                inlinks: rng.random_range(0..100),
                outlinks: rng.random_range(0..10),
            }),
        ),
    };
    let e = EventRecord { network, attribution, subject_user: subject, timestamp: ts, payload };
    e.validate().unwrap();
    e
}
