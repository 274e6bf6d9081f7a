use std::collections::BTreeMap;

use expertise::model::ExpertiseScore;
use expertise::ontology::{Level, TopicNode, TopicOntology};
use expertise::rank::{build_index, RankedIndex};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn score(user: &str, topic: &str, s: f64) -> ExpertiseScore {
    ExpertiseScore { user: user.into(), topic: topic.into(), score: s }
}

fn node(id: &str, slug: &str, display: &str, level: Level, parent: Option<&str>) -> TopicNode {
    TopicNode { id: id.into(), slug: slug.into(), display_name: display.into(), level, parent_id: parent.map(String::from) }
}

fn news_ontology() -> TopicOntology {
    TopicOntology::new([
        node("1", "news", "News", Level::Super, None),
        node("8119426466902417284", "politics", "Politics", Level::Sub, Some("1")),
        node("7192018630863038134", "journalism", "Journalism", Level::Sub, Some("1")),
    ])
    .unwrap()
}

#[test]
fn percentile_examples() {
    let ont = TopicOntology::new([node("t", "t", "T", Level::Super, None), node("s", "s", "S", Level::Super, None)]).unwrap();
    let idx = build_index(&[score("a", "t", 0.9), score("b", "t", 0.5), score("c", "s", 0.1)], &ont, BTreeMap::new());
    let t = idx.ranking("t");
    assert_eq!((t[0].user.as_str(), t[0].rank), ("a", 1));
    assert!((t[0].percentile - 2.0 / 3.0).abs() < 1e-15);
    assert!((t[1].percentile - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(idx.ranking("s")[0].percentile, 0.5);
}

#[test]
fn planted_fixture_queries() {
    let handles = BTreeMap::from([("u1".to_string(), "BarackObama".to_string()), ("u2".to_string(), "washingtonpost".to_string())]);
    let mut scores = vec![score("u1", "8119426466902417284", 0.9), score("u2", "8119426466902417284", 0.8)];
    scores.extend((0..2).map(|i| score(&format!("p{i}"), "8119426466902417284", 0.1)));
    scores.push(score("u2", "7192018630863038134", 0.95));
    scores.extend((0..8).map(|i| score(&format!("j{i}"), "7192018630863038134", 0.2)));
    let idx = build_index(&scores, &news_ontology(), handles);

    let top = idx.top_experts("politics", 10).unwrap();
    let named: Vec<(&str, usize)> = top.iter().take(2).map(|e| (idx.display_handle(&e.user), e.rank)).collect();
    assert_eq!(named, [("BarackObama", 1), ("washingtonpost", 2)]);
    assert!(idx.top_experts("politics", 0).unwrap().is_empty());
    assert_eq!(idx.top_experts("politics", 100).unwrap().len(), 4);
    assert!(idx.top_experts("nope", 1).is_err());

    let topics = idx.user_topics("washingtonpost").unwrap();
    let slugs: Vec<&str> = topics.iter().map(|t| t.topic.slug.as_str()).collect();
    assert_eq!(slugs, ["journalism", "politics"]);
    assert!((topics[0].percentile - 0.9).abs() < 1e-12);
    assert!((topics[1].percentile - 0.6).abs() < 1e-12);
    assert_eq!(idx.user_topics("u2").unwrap(), topics);
    assert!(idx.user_topics("nobody").is_err());
}

#[test]
fn million_users_top_percentile() {
    let n = 1_000_000;
    let ont = TopicOntology::new([node("t", "t", "T", Level::Super, None)]).unwrap();
    let scores: Vec<ExpertiseScore> = (0..n).map(|i| score(&format!("u{i:07}"), "t", 1.0 + i as f64)).collect();
    let idx = build_index(&scores, &ont, BTreeMap::new());
    let top = &idx.ranking("t")[0];
    assert_eq!(top.user, format!("u{:07}", n - 1));
    assert_eq!(top.percentile, 1.0 - 1.0 / (n as f64 + 1.0));
    assert!(top.percentile > 0.999_998 && top.percentile < 1.0);
}

fn random_scores(seed: u64) -> Vec<ExpertiseScore> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // One score per (user, topic); few distinct values so ties are common.
    let mut by_key = BTreeMap::new();
    for _ in 0..rng.random_range(0..200) {
        let key = (format!("u{}", rng.random_range(0..50)), format!("t{}", rng.random_range(0..3)));
        by_key.insert(key, rng.random_range(0..6) as f64 / 4.0);
    }
    by_key.into_iter().map(|((u, t), s)| score(&u, &t, s)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn index_invariants(seed in any::<u64>()) {
        let ont = TopicOntology::new((0..3).map(|i| node(&format!("t{i}"), &format!("s{i}"), "", Level::Super, None))).unwrap();
        let scores = random_scores(seed);
        let idx = build_index(&scores, &ont, BTreeMap::new());
        for t in 0..3 {
            let topic = format!("t{t}");
            let list = idx.ranking(&topic);
            let positive = scores.iter().filter(|s| s.topic == topic && s.score > 0.0).count();
            prop_assert_eq!(list.len(), positive);
            for (i, e) in list.iter().enumerate() {
                prop_assert_eq!(e.rank, i + 1);
                prop_assert!(e.percentile > 0.0 && e.percentile < 1.0);
            }
            for w in list.windows(2) {
                prop_assert!(w[0].score >= w[1].score);
                prop_assert!(w[0].percentile > w[1].percentile);
                if w[0].score == w[1].score {
                    prop_assert!(w[0].user < w[1].user);
                }
            }
        }
        let again = build_index(&scores, &ont, BTreeMap::new());
        for t in 0..3 {
            prop_assert_eq!(idx.ranking(&format!("t{t}")), again.ranking(&format!("t{t}")));
        }
    }

    #[test]
    fn save_load_round_trip(seed in 0u64..64) {
        let ont = TopicOntology::new((0..3).map(|i| node(&format!("t{i}"), &format!("s{i}"), "", Level::Super, None))).unwrap();
        let idx = build_index(&random_scores(seed), &ont, BTreeMap::from([("u1".to_string(), "one".to_string())]));
        let dir = std::env::temp_dir().join(format!("expertise-rank-{}-{seed}", std::process::id()));
        idx.save(&dir).unwrap();
        let loaded = RankedIndex::load(&dir).unwrap();
        for t in 0..3 {
            prop_assert_eq!(idx.ranking(&format!("t{t}")), loaded.ranking(&format!("t{t}")));
        }
        prop_assert_eq!(loaded.handle("u1"), Some("one"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
