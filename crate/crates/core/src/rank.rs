//! Per-topic ranked indexes with rank-based percentiles, plus the top-k and
//! per-user topic queries served by the API.

use std::collections::BTreeMap;
use std::path::Path;

use crate::model::ExpertiseScore;
use crate::ontology::TopicOntology;
use crate::{tsv, Error, Result, TopicId, UserId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicMeta {
    pub id: TopicId,
    pub slug: String,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub user: UserId,
    pub score: f64,
    /// Starts at 1.
    pub rank: usize,
    pub percentile: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserTopic {
    pub topic: TopicMeta,
    pub score: f64,
    pub percentile: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankedIndex {
    topics: BTreeMap<TopicId, TopicMeta>,
    slugs: BTreeMap<String, TopicId>,
    ranked: BTreeMap<TopicId, Vec<RankEntry>>,
    by_user: BTreeMap<UserId, Vec<(TopicId, f64, f64)>>,
    handles: BTreeMap<UserId, String>,
    handle_users: BTreeMap<String, UserId>,
}

pub fn percentile(rank: usize, count: usize) -> f64 {
    1.0 - rank as f64 / (count + 1) as f64
}

/// Ranks positive scores per topic by score descending, then user id.
/// Topic metadata comes from the ontology; unknown topics use their id as slug.
pub fn build_index(
    scores: &[ExpertiseScore],
    ontology: &TopicOntology,
    handles: BTreeMap<UserId, String>,
) -> RankedIndex {
    let mut topics: BTreeMap<TopicId, TopicMeta> = ontology
        .nodes()
        .map(|n| {
            let meta = TopicMeta { id: n.id.clone(), slug: n.slug.clone(), display_name: n.display_name.clone() };
            (n.id.clone(), meta)
        })
        .collect();
    let mut grouped: BTreeMap<TopicId, Vec<(&UserId, f64)>> = BTreeMap::new();
    for s in scores.iter().filter(|s| s.score > 0.0) {
        grouped.entry(s.topic.clone()).or_default().push((&s.user, s.score));
        topics.entry(s.topic.clone()).or_insert_with(|| TopicMeta {
            id: s.topic.clone(),
            slug: s.topic.clone(),
            display_name: s.topic.clone(),
        });
    }
    let ranked = grouped
        .into_iter()
        .map(|(t, mut entries)| {
            entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            let count = entries.len();
            let list = entries
                .into_iter()
                .enumerate()
                .map(|(i, (u, score))| RankEntry {
                    user: u.clone(),
                    score,
                    rank: i + 1,
                    percentile: percentile(i + 1, count),
                })
                .collect();
            (t, list)
        })
        .collect();
    RankedIndex::assemble(topics, ranked, handles)
}

impl RankedIndex {
    fn assemble(
        topics: BTreeMap<TopicId, TopicMeta>,
        ranked: BTreeMap<TopicId, Vec<RankEntry>>,
        handles: BTreeMap<UserId, String>,
    ) -> Self {
        let slugs = topics.values().map(|m| (m.slug.clone(), m.id.clone())).collect();
        let mut by_user: BTreeMap<UserId, Vec<(TopicId, f64, f64)>> = BTreeMap::new();
        for (t, list) in &ranked {
            for e in list {
                by_user.entry(e.user.clone()).or_default().push((t.clone(), e.score, e.percentile));
            }
        }
        for list in by_user.values_mut() {
            list.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| topics[&a.0].slug.cmp(&topics[&b.0].slug)));
        }
        let handle_users = handles.iter().map(|(u, h)| (h.clone(), u.clone())).collect();
        RankedIndex { topics, slugs, ranked, by_user, handles, handle_users }
    }

    pub fn topic(&self, slug: &str) -> Option<&TopicMeta> {
        self.slugs.get(slug).map(|id| &self.topics[id])
    }

    pub fn topics(&self) -> impl Iterator<Item = &TopicMeta> {
        self.topics.values()
    }

    /// Full ranking for a topic id (empty if nobody scored).
    pub fn ranking(&self, topic_id: &str) -> &[RankEntry] {
        self.ranked.get(topic_id).map_or(&[], |v| v.as_slice())
    }

    pub fn handle(&self, user: &str) -> Option<&str> {
        self.handles.get(user).map(|h| h.as_str())
    }

    /// Public name for a user: the handle if known, else the id.
    pub fn display_handle<'a>(&'a self, user: &'a str) -> &'a str {
        self.handle(user).unwrap_or(user)
    }

    pub fn user_count(&self) -> usize {
        self.by_user.len()
    }

    pub fn top_experts(&self, slug: &str, k: usize) -> Result<&[RankEntry]> {
        let meta = self
            .topic(slug)
            .ok_or_else(|| Error::NotFound(format!("unknown topic \"{slug}\"")))?;
        let list = self.ranking(&meta.id);
        Ok(&list[..k.min(list.len())])
    }

    /// Topics with a positive score, percentile descending then slug.
    /// Accepts a user id or a handle.
    pub fn user_topics(&self, user_or_handle: &str) -> Result<Vec<UserTopic>> {
        let list = self
            .by_user
            .get(user_or_handle)
            .or_else(|| self.handle_users.get(user_or_handle).and_then(|u| self.by_user.get(u)))
            .ok_or_else(|| Error::NotFound(format!("unknown user \"{user_or_handle}\"")))?;
        Ok(list
            .iter()
            .map(|(t, score, p)| UserTopic { topic: self.topics[t].clone(), score: *score, percentile: *p })
            .collect())
    }

    /// Writes `topics.tsv`, `handles.tsv` and `topics/<topic_id>.tsv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut meta = String::from("# topic_id\tslug\tdisplay_name\tcount\n");
        for m in self.topics.values() {
            let count = self.ranking(&m.id).len();
            meta.push_str(&format!("{}\t{}\t{}\t{count}\n", m.id, m.slug, m.display_name));
        }
        tsv::write(&dir.join("topics.tsv"), &meta)?;
        let mut handles = String::from("# user\thandle\n");
        for (u, h) in &self.handles {
            handles.push_str(&format!("{u}\t{h}\n"));
        }
        tsv::write(&dir.join("handles.tsv"), &handles)?;
        for (t, list) in &self.ranked {
            if t.is_empty() || !t.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(Error::Validation(format!("topic id \"{t}\" cannot be used as a file name")));
            }
            let mut body = String::from("# rank\tuser\tscore\tpercentile\n");
            for e in list {
                body.push_str(&format!("{}\t{}\t{}\t{}\n", e.rank, e.user, e.score, e.percentile));
            }
            tsv::write(&dir.join("topics").join(format!("{t}.tsv")), &body)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mut topics = BTreeMap::new();
        let mut ranked = BTreeMap::new();
        for (lineno, line) in tsv::data_lines(&tsv::read_to_string(&dir.join("topics.tsv"))?) {
            let f = tsv::fields(line, 4, lineno)?;
            let count: usize = f[3]
                .parse()
                .map_err(|_| Error::Parse(format!("topics.tsv line {lineno}: bad count \"{}\"", f[3])))?;
            let id = f[0].to_string();
            if count > 0 {
                let path = dir.join("topics").join(format!("{id}.tsv"));
                let list = parse_ranking(&tsv::read_to_string(&path)?)?;
                if list.len() != count {
                    return Err(Error::Validation(format!(
                        "{}: expected {count} entries, found {}",
                        path.display(),
                        list.len()
                    )));
                }
                ranked.insert(id.clone(), list);
            }
            topics.insert(id.clone(), TopicMeta { id, slug: f[1].to_string(), display_name: f[2].to_string() });
        }
        let mut handles = BTreeMap::new();
        for (lineno, line) in tsv::data_lines(&tsv::read_to_string(&dir.join("handles.tsv"))?) {
            let f = tsv::fields(line, 2, lineno)?;
            handles.insert(f[0].to_string(), f[1].to_string());
        }
        Ok(Self::assemble(topics, ranked, handles))
    }
}

fn parse_ranking(text: &str) -> Result<Vec<RankEntry>> {
    tsv::data_lines(text)
        .map(|(lineno, line)| {
            let f = tsv::fields(line, 4, lineno)?;
            Ok(RankEntry {
                rank: f[0]
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {lineno}: bad rank \"{}\"", f[0])))?,
                user: f[1].to_string(),
                score: tsv::parse_f64(f[2], lineno)?,
                percentile: tsv::parse_f64(f[3], lineno)?,
            })
        })
        .collect()
}
