//! Event records: parsing, validation and grouping.
//!
//! Event files are UTF-8, one JSON object per line; see `docs/formats.md`.
//! Bad lines are reported, never fatal.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::catalog::{Attribution, FeatureId, Network, Source};
use crate::{tsv, Error, Result, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Message,
    List,
    ProfileField,
    GraphEdge,
    SharedDoc,
    WikiPage,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Message => "MESSAGE",
            EventKind::List => "LIST",
            EventKind::ProfileField => "PROFILE_FIELD",
            EventKind::GraphEdge => "GRAPH_EDGE",
            EventKind::SharedDoc => "SHARED_DOC",
            EventKind::WikiPage => "WIKI_PAGE",
        }
    }

    fn parse(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "MESSAGE" => EventKind::Message,
            "LIST" => EventKind::List,
            "PROFILE_FIELD" => EventKind::ProfileField,
            "GRAPH_EDGE" => EventKind::GraphEdge,
            "SHARED_DOC" => EventKind::SharedDoc,
            "WIKI_PAGE" => EventKind::WikiPage,
            _ => return Err(format!("unknown kind \"{s}\"")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ListRole {
    Member,
    Creator,
    Subscriber,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeSet {
    Followers,
    Following,
    Friends,
}

impl EdgeSet {
    pub fn source(self) -> Source {
        match self {
            EdgeSet::Followers => Source::Followers,
            EdgeSet::Following => Source::Following,
            EdgeSet::Friends => Source::Friends,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProfileField {
    Skill,
    Industry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessagePayload {
    pub text: String,
    pub source_tag: Source,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ListPayload {
    pub list_name: String,
    pub role: ListRole,
    /// Lists the subject belongs to according to their profile, L(u).
    pub listed_total: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePayload {
    pub field: ProfileField,
    pub text: String,
    pub company_followers: u64,
    pub industry_followers: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdgePayload {
    pub actor_user: UserId,
    pub edge_set: EdgeSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharedDocPayload {
    pub doc_id: String,
    pub text: String,
    pub reaction_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WikiPagePayload {
    pub page_text: String,
    pub inlinks: u64,
    pub outlinks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Message(MessagePayload),
    List(ListPayload),
    Profile(ProfilePayload),
    GraphEdge(GraphEdgePayload),
    SharedDoc(SharedDocPayload),
    WikiPage(WikiPagePayload),
}

/// One validated ingested fact.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub network: Network,
    pub attribution: Attribution,
    pub subject_user: UserId,
    pub timestamp: i64,
    pub payload: Payload,
}

impl EventRecord {
    pub fn kind(&self) -> EventKind {
        match self.payload {
            Payload::Message(_) => EventKind::Message,
            Payload::List(_) => EventKind::List,
            Payload::Profile(_) => EventKind::ProfileField,
            Payload::GraphEdge(_) => EventKind::GraphEdge,
            Payload::SharedDoc(_) => EventKind::SharedDoc,
            Payload::WikiPage(_) => EventKind::WikiPage,
        }
    }

    pub fn source(&self) -> Source {
        match &self.payload {
            Payload::Message(m) => m.source_tag,
            Payload::List(_) => Source::List,
            Payload::Profile(p) => match p.field {
                ProfileField::Skill => Source::Skills,
                ProfileField::Industry => Source::Industry,
            },
            Payload::GraphEdge(g) => g.edge_set.source(),
            Payload::SharedDoc(_) => Source::SocialWww,
            Payload::WikiPage(_) => Source::WikiInout,
        }
    }

    /// Catalog feature this event feeds; `None` if the triple is not registered.
    pub fn feature_id(&self) -> Option<FeatureId> {
        FeatureId::lookup(self.network, self.source(), self.attribution)
    }

    /// Checks catalog closure and payload invariants.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.subject_user.is_empty() {
            return Err("empty subject".into());
        }
        match &self.payload {
            Payload::Message(m) => {
                if !matches!(
                    m.source_tag,
                    Source::MsgText | Source::PageText | Source::Hashtag | Source::Url | Source::UrlMeta
                ) {
                    return Err(format!("invalid message source {}", m.source_tag));
                }
                if m.text.trim().is_empty() {
                    return Err("empty message text".into());
                }
            }
            Payload::List(l) => {
                if l.list_name.trim().is_empty() {
                    return Err("empty list name".into());
                }
                let expected = match l.role {
                    ListRole::Member => Attribution::Credited,
                    ListRole::Creator | ListRole::Subscriber => Attribution::Generated,
                };
                if self.attribution != expected {
                    return Err(format!(
                        "list role {:?} requires attribution {expected}",
                        l.role
                    ));
                }
            }
            Payload::Profile(_) => {}
            Payload::GraphEdge(g) => {
                if g.actor_user.is_empty() {
                    return Err("empty actor".into());
                }
                if g.actor_user == self.subject_user {
                    return Err("graph edge actor equals subject".into());
                }
            }
            Payload::SharedDoc(d) => {
                if d.doc_id.is_empty() {
                    return Err("empty doc id".into());
                }
            }
            Payload::WikiPage(_) => {}
        }
        if self.feature_id().is_none() {
            return Err(format!(
                "feature not in catalog: {}_{}_{}",
                self.network,
                self.source(),
                self.attribution
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let payload = match &self.payload {
            Payload::Message(m) => json!({"text": m.text, "source": m.source_tag.as_str()}),
            Payload::List(l) => {
                let role = match l.role {
                    ListRole::Member => "MEMBER",
                    ListRole::Creator => "CREATOR",
                    ListRole::Subscriber => "SUBSCRIBER",
                };
                match l.listed_total {
                    Some(n) => json!({"list_name": l.list_name, "role": role, "listed_total": n}),
                    None => json!({"list_name": l.list_name, "role": role}),
                }
            }
            Payload::Profile(p) => json!({
                "field": match p.field { ProfileField::Skill => "SKILL", ProfileField::Industry => "INDUSTRY" },
                "text": p.text,
                "company_followers": p.company_followers,
                "industry_followers": p.industry_followers,
            }),
            Payload::GraphEdge(g) => json!({
                "actor": g.actor_user,
                "edge_set": match g.edge_set {
                    EdgeSet::Followers => "FOLLOWERS",
                    EdgeSet::Following => "FOLLOWING",
                    EdgeSet::Friends => "FRIENDS",
                },
            }),
            Payload::SharedDoc(d) => json!({"doc_id": d.doc_id, "text": d.text, "reactions": d.reaction_count}),
            Payload::WikiPage(w) => json!({"text": w.page_text, "inlinks": w.inlinks, "outlinks": w.outlinks}),
        };
        json!({
            "kind": self.kind().as_str(),
            "network": self.network.as_str(),
            "attribution": self.attribution.as_str(),
            "subject": self.subject_user,
            "ts": self.timestamp,
            "payload": payload,
        })
    }

    pub fn to_json_line(&self) -> String {
        self.to_json().to_string()
    }
}

#[derive(Deserialize)]
struct RawEvent {
    kind: String,
    network: String,
    attribution: String,
    subject: String,
    ts: i64,
    payload: Value,
}

#[derive(Deserialize)]
struct RawMessage {
    text: String,
    source: String,
}

#[derive(Deserialize)]
struct RawList {
    list_name: String,
    role: ListRole,
    #[serde(default)]
    listed_total: Option<u64>,
}

#[derive(Deserialize)]
struct RawProfile {
    field: ProfileField,
    #[serde(default)]
    text: String,
    #[serde(default)]
    company_followers: u64,
    #[serde(default)]
    industry_followers: u64,
}

#[derive(Deserialize)]
struct RawEdge {
    actor: String,
    edge_set: EdgeSet,
}

#[derive(Deserialize)]
struct RawDoc {
    doc_id: String,
    text: String,
    reactions: u64,
}

#[derive(Deserialize)]
struct RawWiki {
    text: String,
    inlinks: u64,
    outlinks: u64,
}

fn payload<T: for<'de> Deserialize<'de>>(v: Value) -> std::result::Result<T, String> {
    serde_json::from_value(v).map_err(|e| format!("invalid payload: {e}"))
}

/// Parses and validates one line. The error is the reject reason.
pub fn parse_event(line: &str) -> std::result::Result<EventRecord, String> {
    if line.trim().is_empty() {
        return Err("empty line".into());
    }
    let raw: RawEvent =
        serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    let kind = EventKind::parse(&raw.kind)?;
    let network: Network = raw.network.parse().map_err(|_| "unknown network".to_string())?;
    let attribution: Attribution = raw
        .attribution
        .parse()
        .map_err(|_| "unknown attribution".to_string())?;
    let payload = match kind {
        EventKind::Message => {
            let m: RawMessage = payload(raw.payload)?;
            Payload::Message(MessagePayload {
                text: m.text,
                source_tag: m.source.parse().map_err(|_| "unknown source".to_string())?,
            })
        }
        EventKind::List => {
            let l: RawList = payload(raw.payload)?;
            Payload::List(ListPayload {
                list_name: l.list_name,
                role: l.role,
                listed_total: l.listed_total,
            })
        }
        EventKind::ProfileField => {
            let p: RawProfile = payload(raw.payload)?;
            Payload::Profile(ProfilePayload {
                field: p.field,
                text: p.text,
                company_followers: p.company_followers,
                industry_followers: p.industry_followers,
            })
        }
        EventKind::GraphEdge => {
            let g: RawEdge = payload(raw.payload)?;
            Payload::GraphEdge(GraphEdgePayload {
                actor_user: g.actor,
                edge_set: g.edge_set,
            })
        }
        EventKind::SharedDoc => {
            let d: RawDoc = payload(raw.payload)?;
            Payload::SharedDoc(SharedDocPayload {
                doc_id: d.doc_id,
                text: d.text,
                reaction_count: d.reactions,
            })
        }
        EventKind::WikiPage => {
            let w: RawWiki = payload(raw.payload)?;
            Payload::WikiPage(WikiPagePayload {
                page_text: w.text,
                inlinks: w.inlinks,
                outlinks: w.outlinks,
            })
        }
    };
    let event = EventRecord {
        network,
        attribution,
        subject_user: raw.subject,
        timestamp: raw.ts,
        payload,
    };
    event.validate()?;
    Ok(event)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReadReport {
    pub lines: usize,
    pub accepted: usize,
    pub rejects: Vec<Reject>,
}

impl ReadReport {
    /// `line<TAB>reason` rows under a header.
    pub fn rejects_tsv(&self) -> String {
        let mut out = String::from("line\treason\n");
        for r in &self.rejects {
            out.push_str(&format!("{}\t{}\n", r.line, r.reason.replace(['\t', '\n'], " ")));
        }
        out
    }
}

/// Iterates `(line number, result)` over the lines of an event file.
pub fn events(text: &str) -> impl Iterator<Item = (usize, std::result::Result<EventRecord, String>)> + '_ {
    text.lines().enumerate().map(|(i, l)| (i + 1, parse_event(l)))
}

/// Parses a whole file body. Every line is either accepted or rejected.
pub fn parse_events(text: &str) -> (Vec<EventRecord>, ReadReport) {
    let mut report = ReadReport::default();
    let mut out = Vec::new();
    for (line, parsed) in events(text) {
        report.lines += 1;
        match parsed {
            Ok(e) => {
                report.accepted += 1;
                out.push(e);
            }
            Err(reason) => report.rejects.push(Reject { line, reason }),
        }
    }
    (out, report)
}

pub fn read_events(path: &Path) -> Result<(Vec<EventRecord>, ReadReport)> {
    Ok(parse_events(&tsv::read_to_string(path)?))
}

pub fn write_events(path: &Path, events: &[EventRecord]) -> Result<()> {
    let mut body = String::new();
    for e in events {
        body.push_str(&e.to_json_line());
        body.push('\n');
    }
    tsv::write(path, &body)
}

/// Keeps events with `ts > reference - window_days`. The reference defaults
/// to the newest timestamp so the result depends on the data only.
/// Returns the kept events, the number dropped and the reference used.
pub fn filter_window(
    events: Vec<EventRecord>,
    window_days: u32,
    reference_ts: Option<i64>,
) -> (Vec<EventRecord>, usize, i64) {
    let reference = reference_ts
        .or_else(|| events.iter().map(|e| e.timestamp).max())
        .unwrap_or(0);
    let cutoff = reference - i64::from(window_days) * 86_400;
    let before = events.len();
    let kept: Vec<EventRecord> = events.into_iter().filter(|e| e.timestamp > cutoff).collect();
    let dropped = before - kept.len();
    (kept, dropped, reference)
}

/// Groups events by subject, keeping per-user file order.
pub fn partition_by_user(events: impl IntoIterator<Item = EventRecord>) -> BTreeMap<UserId, Vec<EventRecord>> {
    let mut out: BTreeMap<UserId, Vec<EventRecord>> = BTreeMap::new();
    for e in events {
        out.entry(e.subject_user.clone()).or_default().push(e);
    }
    out
}

/// Every user mentioned anywhere (subjects and graph actors).
pub fn corpus_users<'a>(events: impl IntoIterator<Item = &'a EventRecord>) -> std::collections::BTreeSet<UserId> {
    let mut out = std::collections::BTreeSet::new();
    for e in events {
        out.insert(e.subject_user.clone());
        if let Payload::GraphEdge(g) = &e.payload {
            out.insert(g.actor_user.clone());
        }
    }
    out
}

impl std::str::FromStr for EventRecord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_event(s).map_err(Error::Parse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MSG: &str = r#"{"kind":"MESSAGE","network":"TW","attribution":"GENERATED","subject":"a","ts":100,"payload":{"text":"machine learning","source":"MSG_TEXT"}}"#;

    #[test]
    fn three_valid_messages() {
        let text = format!("{MSG}\n{MSG}\n{MSG}\n");
        let (events, report) = parse_events(&text);
        assert_eq!(events.len(), 3);
        assert_eq!(report.lines, 3);
        assert!(report.rejects.is_empty());
        assert_eq!(events[0].feature_id().unwrap().name(), "TW_MSG_TEXT_GENERATED");
    }

    #[test]
    fn unknown_network_rejected() {
        let bad = MSG.replace("\"TW\"", "\"XY\"");
        let (events, report) = parse_events(&bad);
        assert!(events.is_empty());
        assert_eq!(report.rejects.len(), 1);
        assert_eq!(report.rejects[0].reason, "unknown network");
        assert_eq!(report.rejects[0].line, 1);
    }

    #[test]
    fn reject_reasons() {
        let cases = [
            ("not json", "malformed record"),
            ("", "empty line"),
            (&MSG.replace("MESSAGE", "POKE") as &str, "unknown kind"),
            (&MSG.replace("machine learning", " "), "empty message text"),
            (&MSG.replace("\"TW\"", "\"WIKI\""), "feature not in catalog"),
            (&MSG.replace("GENERATED", "GRAPH"), "feature not in catalog"),
            (
                r#"{"kind":"GRAPH_EDGE","network":"TW","attribution":"GRAPH","subject":"a","ts":1,"payload":{"actor":"a","edge_set":"FOLLOWERS"}}"#,
                "actor equals subject",
            ),
            (
                r#"{"kind":"GRAPH_EDGE","network":"FB","attribution":"GRAPH","subject":"a","ts":1,"payload":{"actor":"b","edge_set":"FOLLOWERS"}}"#,
                "feature not in catalog",
            ),
            (
                r#"{"kind":"LIST","network":"TW","attribution":"GENERATED","subject":"a","ts":1,"payload":{"list_name":"x","role":"MEMBER"}}"#,
                "requires attribution CREDITED",
            ),
            (
                r#"{"kind":"SHARED_DOC","network":"TW","attribution":"GENERATED","subject":"a","ts":1,"payload":{"doc_id":"d","text":"t","reactions":-1}}"#,
                "invalid payload",
            ),
        ];
        for (line, reason) in cases {
            let err = parse_event(line).unwrap_err();
            assert!(err.contains(reason), "{line:?}: {err}");
        }
    }

    #[test]
    fn every_kind_round_trips_through_json() {
        let lines = [
            MSG,
            r#"{"kind":"LIST","network":"TW","attribution":"CREDITED","subject":"a","ts":1,"payload":{"list_name":"ml people","role":"MEMBER","listed_total":9}}"#,
            r#"{"kind":"PROFILE_FIELD","network":"LI","attribution":"GENERATED","subject":"a","ts":1,"payload":{"field":"INDUSTRY","text":"software","company_followers":5,"industry_followers":10}}"#,
            r#"{"kind":"GRAPH_EDGE","network":"FB","attribution":"GRAPH","subject":"a","ts":1,"payload":{"actor":"b","edge_set":"FRIENDS"}}"#,
            r#"{"kind":"SHARED_DOC","network":"TW","attribution":"GENERATED","subject":"a","ts":1,"payload":{"doc_id":"d","text":"t","reactions":3}}"#,
            r#"{"kind":"WIKI_PAGE","network":"WIKI","attribution":"GENERATED","subject":"a","ts":1,"payload":{"text":"t","inlinks":3,"outlinks":0}}"#,
        ];
        for line in lines {
            let e = parse_event(line).unwrap();
            assert_eq!(parse_event(&e.to_json_line()).unwrap(), e);
        }
    }

    #[test]
    fn partition_groups_by_subject() {
        let a = parse_event(MSG).unwrap();
        let mut b = a.clone();
        b.subject_user = "b".into();
        let groups = partition_by_user(vec![a.clone(), a.clone(), b]);
        assert_eq!(groups["a"].len(), 2);
        assert_eq!(groups["b"].len(), 1);
        assert!(partition_by_user(Vec::new()).is_empty());
    }

    #[test]
    fn window_filter_uses_newest_timestamp() {
        let mut old = parse_event(MSG).unwrap();
        old.timestamp = 0;
        let mut new = old.clone();
        new.timestamp = 91 * 86_400;
        let (kept, dropped, reference) = filter_window(vec![old, new.clone()], 90, None);
        assert_eq!(kept, vec![new]);
        assert_eq!(dropped, 1);
        assert_eq!(reference, 91 * 86_400);
    }
}
