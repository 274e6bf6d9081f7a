//! Topic ontology, phrase dictionary and text → bag-of-topics mapping.
//!
//! Ontology file, one node per line:
//! `id<TAB>slug<TAB>display_name<TAB>level<TAB>parent_id-or-dash`.
//! Dictionary file: `phrase<TAB>topic_id<TAB>weight`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::{tsv, Error, Result, TopicId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Super,
    Sub,
    Entity,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Super => "super",
            Level::Sub => "sub",
            Level::Entity => "entity",
        }
    }

    fn parent_level(self) -> Option<Level> {
        match self {
            Level::Super => None,
            Level::Sub => Some(Level::Super),
            Level::Entity => Some(Level::Sub),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "super" => Ok(Level::Super),
            "sub" => Ok(Level::Sub),
            "entity" => Ok(Level::Entity),
            other => Err(Error::Parse(format!("unknown level \"{other}\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicNode {
    pub id: TopicId,
    pub slug: String,
    pub display_name: String,
    pub level: Level,
    pub parent_id: Option<TopicId>,
}

/// Validated three-level topic tree.
#[derive(Debug, Clone, Default)]
pub struct TopicOntology {
    nodes: BTreeMap<TopicId, TopicNode>,
    slugs: HashMap<String, TopicId>,
}

impl TopicOntology {
    /// Builds and validates an ontology from nodes.
    pub fn new(nodes: impl IntoIterator<Item = TopicNode>) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        let mut slugs = HashMap::new();
        for node in nodes {
            if slugs.insert(node.slug.clone(), node.id.clone()).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate slug \"{}\" (topic {})",
                    node.slug, node.id
                )));
            }
            if let Some(prev) = by_id.insert(node.id.clone(), node) {
                return Err(Error::Validation(format!("duplicate topic id {}", prev.id)));
            }
        }
        for node in by_id.values() {
            match (node.level.parent_level(), &node.parent_id) {
                (None, None) => {}
                (None, Some(_)) => {
                    return Err(Error::Validation(format!(
                        "level mismatch: super topic {} must not have a parent",
                        node.id
                    )))
                }
                (Some(_), None) => {
                    return Err(Error::Validation(format!(
                        "orphan: {} topic {} has no parent",
                        node.level, node.id
                    )))
                }
                (Some(expected), Some(parent)) => {
                    let parent = by_id.get(parent).ok_or_else(|| {
                        Error::Validation(format!(
                            "orphan parent: topic {} references unknown parent {parent}",
                            node.id
                        ))
                    })?;
                    if parent.level != expected {
                        return Err(Error::Validation(format!(
                            "level mismatch: {} topic {} has {} parent {}",
                            node.level, node.id, parent.level, parent.id
                        )));
                    }
                }
            }
        }
        Ok(TopicOntology {
            nodes: by_id,
            slugs,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut nodes = Vec::new();
        for (lineno, line) in tsv::data_lines(text) {
            let f = tsv::fields(line, 5, lineno)?;
            let nonempty = |v: &str, what: &str| -> Result<String> {
                if v.trim().is_empty() {
                    Err(Error::Parse(format!("line {lineno}: empty {what}")))
                } else {
                    Ok(v.to_string())
                }
            };
            nodes.push(TopicNode {
                id: nonempty(f[0], "id")?,
                slug: nonempty(f[1], "slug")?,
                display_name: f[2].to_string(),
                level: f[3]
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?,
                parent_id: match f[4] {
                    "-" | "" => None,
                    p => Some(p.to_string()),
                },
            });
        }
        Self::new(nodes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&tsv::read_to_string(path)?)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let counts = self.level_counts();
        out.push_str(&format!(
            "# super={} sub={} entity={}\n",
            counts[0], counts[1], counts[2]
        ));
        for n in self.nodes.values() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                n.id,
                n.slug,
                n.display_name,
                n.level,
                n.parent_id.as_deref().unwrap_or("-")
            ));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TopicNode> {
        self.nodes.get(id)
    }

    pub fn by_slug(&self, slug: &str) -> Option<&TopicNode> {
        self.slugs.get(slug).and_then(|id| self.nodes.get(id))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TopicNode> {
        self.nodes.values()
    }

    /// Parent-child edges, i.e. the number of non-super nodes.
    pub fn edge_count(&self) -> usize {
        self.nodes.values().filter(|n| n.parent_id.is_some()).count()
    }

    /// Node counts as `[super, sub, entity]`.
    pub fn level_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for n in self.nodes.values() {
            c[n.level as usize] += 1;
        }
        c
    }

    /// Super-topic ancestor of `id` (itself for super nodes).
    pub fn super_of(&self, id: &str) -> Option<&TopicNode> {
        let mut node = self.nodes.get(id)?;
        while let Some(parent) = &node.parent_id {
            node = self.nodes.get(parent)?;
        }
        Some(node)
    }
}

/// Counts declared in a `# super=.. sub=.. entity=..` header, if present.
pub fn declared_level_counts(text: &str) -> Option<[usize; 3]> {
    let get = |k| tsv::header_value(text, k)?.parse().ok();
    Some([get("super")?, get("sub")?, get("entity")?])
}

/// Splits on Unicode whitespace, strips punctuation at token edges and
/// lowercases. Tokens that are pure punctuation are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Rewrites `#CamelCase_tags` into plain words: `camel case tags`.
pub fn expand_hashtags(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 8);
    for (i, raw) in text.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let Some(tag) = raw.strip_prefix('#') else {
            out.push_str(raw);
            continue;
        };
        let chars: Vec<char> = tag.chars().collect();
        for (j, &c) in chars.iter().enumerate() {
            if c == '_' || c == '-' {
                out.push(' ');
                continue;
            }
            if j > 0 && c.is_uppercase() {
                let prev = chars[j - 1];
                let next_lower = chars.get(j + 1).is_some_and(|n| n.is_lowercase());
                if prev.is_lowercase() || prev.is_numeric() || (prev.is_uppercase() && next_lower) {
                    out.push(' ');
                }
            }
            out.push(c);
        }
    }
    out
}

/// Topic frequencies for one text. Absent topics have weight 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BagOfTopics(BTreeMap<TopicId, f64>);

impl BagOfTopics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, topic: &str, weight: f64) {
        if weight > 0.0 {
            *self.0.entry(topic.to_string()).or_insert(0.0) += weight;
        }
    }

    pub fn get(&self, topic: &str) -> f64 {
        self.0.get(topic).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TopicId, f64)> {
        self.0.iter().map(|(t, &w)| (t, w))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }
}

impl FromIterator<(TopicId, f64)> for BagOfTopics {
    fn from_iter<I: IntoIterator<Item = (TopicId, f64)>>(iter: I) -> Self {
        let mut bag = BagOfTopics::new();
        for (t, w) in iter {
            bag.add(&t, w);
        }
        bag
    }
}

/// Normalized phrase → weighted topics. Ambiguous phrases keep every topic.
#[derive(Debug, Clone, Default)]
pub struct PhraseDictionary {
    entries: HashMap<String, Vec<(TopicId, f64)>>,
    max_phrase_tokens: usize,
}

impl PhraseDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a phrase, validating the topic against `ont`.
    pub fn insert(&mut self, phrase: &str, topic: &str, weight: f64, ont: &TopicOntology) -> Result<()> {
        let tokens = tokenize(phrase);
        if tokens.is_empty() {
            return Err(Error::Validation(format!("empty phrase \"{phrase}\"")));
        }
        if ont.get(topic).is_none() {
            return Err(Error::Validation(format!(
                "phrase \"{phrase}\" references unknown topic {topic}"
            )));
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::Validation(format!(
                "phrase \"{phrase}\" has invalid weight {weight}"
            )));
        }
        self.max_phrase_tokens = self.max_phrase_tokens.max(tokens.len());
        let topics = self.entries.entry(tokens.join(" ")).or_default();
        match topics.iter_mut().find(|(t, _)| t == topic) {
            Some(existing) => existing.1 = weight,
            None => topics.push((topic.to_string(), weight)),
        }
        Ok(())
    }

    pub fn parse(text: &str, ont: &TopicOntology) -> Result<Self> {
        let mut dict = PhraseDictionary::new();
        for (lineno, line) in tsv::data_lines(text) {
            let parts: Vec<&str> = line.split('\t').collect();
            let weight = match parts.len() {
                2 => 1.0,
                3 => tsv::parse_f64(parts[2], lineno)?,
                n => {
                    return Err(Error::Parse(format!(
                        "line {lineno}: expected 3 tab-separated fields, found {n}"
                    )))
                }
            };
            dict.insert(parts[0], parts[1], weight, ont)
                .map_err(|e| Error::Validation(format!("line {lineno}: {e}")))?;
        }
        Ok(dict)
    }

    pub fn load(path: &Path, ont: &TopicOntology) -> Result<Self> {
        Self::parse(&tsv::read_to_string(path)?, ont)
    }

    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<(&String, &TopicId, f64)> = self
            .entries
            .iter()
            .flat_map(|(p, ts)| ts.iter().map(move |(t, w)| (p, t, *w)))
            .collect();
        rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        rows.iter().map(|(p, t, w)| format!("{p}\t{t}\t{w}\n")).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_phrase_tokens(&self) -> usize {
        self.max_phrase_tokens
    }

    pub fn lookup(&self, normalized_phrase: &str) -> Option<&[(TopicId, f64)]> {
        self.entries.get(normalized_phrase).map(Vec::as_slice)
    }

    /// Greedy longest-match-first, left to right, non-overlapping.
    pub fn topicize(&self, text: &str) -> BagOfTopics {
        let tokens = tokenize(text);
        let mut bag = BagOfTopics::new();
        let mut i = 0;
        while i < tokens.len() {
            let longest = self.max_phrase_tokens.min(tokens.len() - i);
            let hit = (1..=longest).rev().find_map(|len| {
                self.entries
                    .get(&tokens[i..i + len].join(" "))
                    .map(|topics| (len, topics))
            });
            match hit {
                Some((len, topics)) => {
                    for (t, w) in topics {
                        bag.add(t, *w);
                    }
                    i += len;
                }
                None => i += 1,
            }
        }
        bag
    }
}

/// Validates that every dictionary topic is present in `ont`.
pub fn check_dictionary(dict: &PhraseDictionary, ont: &TopicOntology) -> Result<()> {
    let missing: HashSet<&TopicId> = dict
        .entries
        .values()
        .flatten()
        .map(|(t, _)| t)
        .filter(|t| ont.get(t).is_none())
        .collect();
    match missing.into_iter().min() {
        Some(t) => Err(Error::Validation(format!("dictionary references unknown topic {t}"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> TopicOntology {
        TopicOntology::parse(
            "ls\tlifestyle\tLifestyle\tsuper\t-\n\
             fd\tfood\tFood\tsub\tls\n\
             su\tsushi\tSushi\tentity\tfd\n",
        )
        .unwrap()
    }

    #[test]
    fn minimal_tree() {
        let ont = minimal();
        assert_eq!(ont.len(), 3);
        assert_eq!(ont.edge_count(), 2);
        assert_eq!(ont.super_of("su").unwrap().slug, "lifestyle");
        assert_eq!(ont.by_slug("food").unwrap().id, "fd");
    }

    #[test]
    fn entity_under_super_is_level_mismatch() {
        let err = TopicOntology::parse(
            "ls\tlifestyle\tLifestyle\tsuper\t-\n\
             su\tsushi\tSushi\tentity\tls\n",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("level mismatch"), "{msg}");
        assert!(msg.contains("su"), "{msg}");
    }

    #[test]
    fn validation_errors_name_record() {
        let dup = TopicOntology::parse(
            "a\tx\tX\tsuper\t-\n\
             b\tx\tX2\tsuper\t-\n",
        )
        .unwrap_err();
        assert!(dup.to_string().contains("duplicate slug \"x\""));

        let orphan = TopicOntology::parse("b\tfood\tFood\tsub\tnope\n").unwrap_err();
        assert!(orphan.to_string().contains("unknown parent nope"));

        let parse = TopicOntology::parse("a\tx\tX\tsuper\n").unwrap_err();
        assert!(matches!(parse, Error::Parse(_)));
        assert!(parse.to_string().contains("line 1"));

        let lvl = TopicOntology::parse("a\tx\tX\tplanet\t-\n").unwrap_err();
        assert!(lvl.to_string().contains("unknown level"));
    }

    #[test]
    fn ontology_tsv_round_trip() {
        let ont = minimal();
        let text = ont.to_tsv();
        assert_eq!(declared_level_counts(&text), Some([1, 1, 1]));
        let again = TopicOntology::parse(&text).unwrap();
        assert_eq!(again.to_tsv(), text);
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("  Hello, World!  (ok) -- "), vec!["hello", "world", "ok"]);
        assert_eq!(tokenize("don't"), vec!["don't"]);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn hashtags_split_camel_case() {
        assert_eq!(expand_hashtags("#MachineLearning rocks"), "Machine Learning rocks");
        assert_eq!(expand_hashtags("#deep_learning"), "deep learning");
        assert_eq!(expand_hashtags("#NASAMission"), "NASA Mission");
        assert_eq!(expand_hashtags("no tags"), "no tags");
    }

    fn ml_dict() -> (TopicOntology, PhraseDictionary) {
        let ont = TopicOntology::parse(
            "tech\ttechnology\tTechnology\tsuper\t-\n\
             ml\tmachine-learning\tMachine Learning\tsub\ttech\n\
             mc\tmachines\tMachines\tsub\ttech\n",
        )
        .unwrap();
        let dict = PhraseDictionary::parse(
            "machine learning\tml\t1.0\nmachine\tmc\t1.0\n",
            &ont,
        )
        .unwrap();
        (ont, dict)
    }

    #[test]
    fn single_match() {
        let (_, dict) = ml_dict();
        let bag = dict.topicize("machine learning rocks");
        assert_eq!(bag.len(), 1);
        assert_eq!(bag.get("ml"), 1.0);
        assert_eq!(bag.get("mc"), 0.0);
    }

    #[test]
    fn empty_text_gives_empty_bag() {
        let (_, dict) = ml_dict();
        assert!(dict.topicize("").is_empty());
        assert!(dict.topicize("nothing to see").is_empty());
    }

    #[test]
    fn longest_match_wins_and_is_case_insensitive() {
        let (_, dict) = ml_dict();
        let bag = dict.topicize("MACHINE Learning, machine. machine");
        assert_eq!(bag.get("ml"), 1.0);
        assert_eq!(bag.get("mc"), 2.0);
    }

    #[test]
    fn dictionary_validation() {
        let (ont, _) = ml_dict();
        let err = PhraseDictionary::parse("foo\tnope\t1\n", &ont).unwrap_err();
        assert!(err.to_string().contains("unknown topic nope"));
        let err = PhraseDictionary::parse(" ,, \tml\t1\n", &ont).unwrap_err();
        assert!(err.to_string().contains("empty phrase"));
        let d = PhraseDictionary::parse("Machine   Learning\tml\n", &ont).unwrap();
        assert!(d.lookup("machine learning").is_some());
        check_dictionary(&d, &ont).unwrap();
    }

    #[test]
    fn ambiguous_phrase_emits_all_topics() {
        let (ont, mut dict) = ml_dict();
        dict.insert("machine", "ml", 0.5, &ont).unwrap();
        let bag = dict.topicize("machine");
        assert_eq!(bag.get("mc"), 1.0);
        assert_eq!(bag.get("ml"), 0.5);
    }
}
