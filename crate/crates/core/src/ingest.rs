//! Event-log ingestion: NDJSON parsing, influencer and repository selection,
//! monthly influence-network construction and per-influencer connection
//! features.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Read};
use std::str::FromStr;

use chrono::DateTime;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::graph::{Covariates, DirectedGraph, NodeCovariates, NodeId, NodeKind, Snapshot, TemporalNetwork};
use crate::month::Month;
use crate::stats::{direct_links_from, paths2_from, paths3_from, triangles_from};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventType {
    WatchEvent,
    PullRequestReviewCommentEvent,
    IssueCommentEvent,
    MemberEvent,
    IssuesEvent,
    GollumEvent,
    ForkEvent,
    ReleaseEvent,
    PublicEvent,
    PullRequestEvent,
    PushEvent,
    DeleteEvent,
    CommitCommentEvent,
    CreateEvent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventCategory {
    /// Reacting to someone else's work (starring, commenting, ...).
    Receptive,
    /// Producing work on a repository.
    Contributive,
}

impl EventType {
    pub const ALL: [EventType; 14] = [
        EventType::WatchEvent,
        EventType::PullRequestReviewCommentEvent,
        EventType::IssueCommentEvent,
        EventType::MemberEvent,
        EventType::IssuesEvent,
        EventType::GollumEvent,
        EventType::ForkEvent,
        EventType::ReleaseEvent,
        EventType::PublicEvent,
        EventType::PullRequestEvent,
        EventType::PushEvent,
        EventType::DeleteEvent,
        EventType::CommitCommentEvent,
        EventType::CreateEvent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventType::WatchEvent => "WatchEvent",
            EventType::PullRequestReviewCommentEvent => "PullRequestReviewCommentEvent",
            EventType::IssueCommentEvent => "IssueCommentEvent",
            EventType::MemberEvent => "MemberEvent",
            EventType::IssuesEvent => "IssuesEvent",
            EventType::GollumEvent => "GollumEvent",
            EventType::ForkEvent => "ForkEvent",
            EventType::ReleaseEvent => "ReleaseEvent",
            EventType::PublicEvent => "PublicEvent",
            EventType::PullRequestEvent => "PullRequestEvent",
            EventType::PushEvent => "PushEvent",
            EventType::DeleteEvent => "DeleteEvent",
            EventType::CommitCommentEvent => "CommitCommentEvent",
            EventType::CreateEvent => "CreateEvent",
        }
    }

    /// WatchEvent is receptive only.
    pub fn category(self) -> EventCategory {
        match self {
            EventType::WatchEvent
            | EventType::PullRequestReviewCommentEvent
            | EventType::IssueCommentEvent
            | EventType::MemberEvent
            | EventType::IssuesEvent
            | EventType::GollumEvent => EventCategory::Receptive,
            _ => EventCategory::Contributive,
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown event type {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    /// UTC seconds.
    pub timestamp: i64,
    pub event_type: EventType,
    pub actor: String,
    pub repo: String,
    pub target_user: Option<String>,
}

impl EventRecord {
    pub fn month(&self) -> Month {
        Month::from_unix(self.timestamp).expect("timestamp validated at parse time")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedLine {
    /// 1-based.
    pub line: usize,
    pub reason: String,
    pub text: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub lines_read: usize,
    pub rejected: usize,
    /// The first few rejected lines, verbatim.
    pub samples: Vec<RejectedLine>,
}

pub const REJECTION_SAMPLES: usize = 10;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParsedLog {
    pub records: Vec<EventRecord>,
    pub report: RejectionReport,
}

fn id_field(v: &Value, path: &[&str]) -> std::result::Result<Option<String>, String> {
    let mut cur = v;
    for key in path {
        match cur.get(key) {
            Some(next) => cur = next,
            None => return Ok(None),
        }
    }
    match cur {
        Value::String(s) if !s.is_empty() => Ok(Some(s.clone())),
        Value::Number(n) => Ok(Some(n.to_string())),
        Value::Null => Ok(None),
        other => Err(format!("{} is not an id: {other}", path.join("."))),
    }
}

fn parse_line(text: &str) -> std::result::Result<EventRecord, String> {
    let v: Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    let kind = v.get("type").and_then(Value::as_str).ok_or("missing type")?;
    let event_type = EventType::from_str(kind).map_err(|e| e.to_string())?;
    let created = v.get("created_at").and_then(Value::as_str).ok_or("missing created_at")?;
    let timestamp = DateTime::parse_from_rfc3339(created)
        .map_err(|e| format!("bad created_at {created:?}: {e}"))?
        .timestamp();
    let actor = id_field(&v, &["actor", "id"])?.ok_or("missing actor.id")?;
    let repo = id_field(&v, &["repo", "id"])?.ok_or("missing repo.id")?;
    let target_user = id_field(&v, &["payload", "member", "id"])?;
    Ok(EventRecord { timestamp, event_type, actor, repo, target_user })
}

/// Parses newline-delimited JSON events. Malformed lines are skipped and
/// reported; blank lines are ignored. Only read errors are fatal.
pub fn parse_event_log<R: BufRead>(mut reader: R) -> Result<ParsedLog> {
    let mut out = ParsedLog::default();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let raw = String::from_utf8_lossy(&buf);
        let text = raw.trim_end_matches(['\n', '\r']);
        if text.trim().is_empty() {
            continue;
        }
        out.report.lines_read += 1;
        let parsed = match std::str::from_utf8(&buf) {
            Ok(_) => parse_line(text),
            Err(_) => Err("invalid UTF-8".to_string()),
        };
        match parsed {
            Ok(rec) => out.records.push(rec),
            Err(reason) => {
                out.report.rejected += 1;
                if out.report.samples.len() < REJECTION_SAMPLES {
                    out.report.samples.push(RejectedLine { line: line_no, reason, text: text.to_string() });
                }
            }
        }
    }
    Ok(out)
}

/// Reads `user,followers` CSV (with header).
pub fn read_follower_counts<R: Read>(reader: R) -> Result<BTreeMap<String, u64>> {
    #[derive(Deserialize)]
    struct Row {
        user: String,
        followers: u64,
    }
    let mut out = BTreeMap::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: Row = row?;
        if out.insert(row.user.clone(), row.followers).is_some() {
            return Err(Error::Data(format!("duplicate follower count for {:?}", row.user)));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedUser {
    pub rank: usize,
    pub id: String,
    pub followers: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfluencerSelection {
    pub k: usize,
    pub ranked: Vec<RankedUser>,
    /// Smallest follower count among the selected users: the effective cutoff.
    pub min_followers: Option<u64>,
    pub note: String,
}

impl InfluencerSelection {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.ranked.iter().map(|r| r.id.as_str())
    }
}

/// Top `k` users by follower count; ties go to the lexicographically smaller id.
pub fn select_influencers(follower_counts: &BTreeMap<String, u64>, k: usize) -> Result<InfluencerSelection> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut users: Vec<(&String, u64)> = follower_counts.iter().map(|(u, &c)| (u, c)).collect();
    users.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let ranked: Vec<RankedUser> = users
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (id, followers))| RankedUser { rank: i + 1, id: id.clone(), followers })
        .collect();
    let min_followers = ranked.last().map(|r| r.followers);
    let note = match min_followers {
        Some(m) => format!("top {} users by follower count; every selected user has at least {m} followers", ranked.len()),
        None => "no follower counts supplied".to_string(),
    };
    Ok(InfluencerSelection { k, ranked, min_followers, note })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: String,
    pub end: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    #[serde(default = "default_top_repos")]
    pub top_k_repos: usize,
    #[serde(default = "default_top_influencers")]
    pub top_k_influencers: usize,
    /// Inclusive calendar months, `YYYY-MM`.
    pub date_range: DateRange,
}

fn default_top_repos() -> usize {
    100
}
fn default_top_influencers() -> usize {
    10
}

impl IngestConfig {
    pub fn new(start: &str, end: &str) -> Self {
        IngestConfig {
            top_k_repos: 100,
            top_k_influencers: 10,
            date_range: DateRange { start: start.to_string(), end: end.to_string() },
        }
    }

    /// Validated month bounds.
    pub fn months(&self) -> Result<(Month, Month)> {
        if self.top_k_repos == 0 || self.top_k_influencers == 0 {
            return Err(Error::Config("top_k_repos and top_k_influencers must be positive".into()));
        }
        let start: Month = self.date_range.start.parse().map_err(|e| Error::Config(format!("date_range.start: {e}")))?;
        let end: Month = self.date_range.end.parse().map_err(|e| Error::Config(format!("date_range.end: {e}")))?;
        if start >= end {
            return Err(Error::Config(format!("date_range start {start} must precede end {end}")));
        }
        Ok((start, end))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLabel {
    pub id: String,
    pub kind: NodeKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedRepo {
    pub rank: usize,
    pub id: String,
    pub watchers: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceNetwork {
    pub network: TemporalNetwork,
    /// External id of each node index.
    pub nodes: Vec<NodeLabel>,
    pub influencers: InfluencerSelection,
    pub top_repos: Vec<RankedRepo>,
    pub events_in_range: usize,
    pub events_out_of_range: usize,
}

impl InfluenceNetwork {
    pub fn influencer_nodes(&self) -> Vec<NodeId> {
        self.network.covariates().influencers().collect()
    }
}

/// Builds one snapshot per calendar month of the configured range.
///
/// Users: the selected influencers, then every other user active on a top
/// repository (sorted by id), then the top repositories in popularity order.
/// Edges, per month: user -> repo for any event on a top repository, and
/// influencer -> user when the user acts on a top repository the influencer
/// acted on strictly earlier in the same or the previous month.
pub fn build_influence_network(
    events: &[EventRecord],
    follower_counts: &BTreeMap<String, u64>,
    cfg: &IngestConfig,
) -> Result<InfluenceNetwork> {
    let (start, end) = cfg.months()?;
    let months = Month::range_inclusive(start, end);
    let in_range: Vec<&EventRecord> = events.iter().filter(|e| (start..=end).contains(&e.month())).collect();
    let events_out_of_range = events.len() - in_range.len();

    // popularity = distinct stargazers; every repo seen is a candidate
    let mut watchers: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for e in &in_range {
        let entry = watchers.entry(e.repo.as_str()).or_default();
        if e.event_type == EventType::WatchEvent {
            entry.insert(e.actor.as_str());
        }
    }
    let mut repos: Vec<(&str, usize)> = watchers.iter().map(|(r, w)| (*r, w.len())).collect();
    repos.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    repos.truncate(cfg.top_k_repos);
    let top_repos: Vec<RankedRepo> = repos
        .iter()
        .enumerate()
        .map(|(i, (id, w))| RankedRepo { rank: i + 1, id: id.to_string(), watchers: *w })
        .collect();

    let influencers = select_influencers(follower_counts, cfg.top_k_influencers)?;
    let mut user_index: HashMap<&str, usize> = HashMap::new();
    let mut nodes = Vec::new();
    for id in influencers.ids() {
        user_index.insert(id, nodes.len());
        nodes.push(NodeLabel { id: id.to_string(), kind: NodeKind::User });
    }
    let repo_index: HashMap<&str, usize> = repos.iter().enumerate().map(|(i, (r, _))| (*r, i)).collect();
    let relevant: Vec<&EventRecord> = in_range.into_iter().filter(|e| repo_index.contains_key(e.repo.as_str())).collect();
    let others: BTreeSet<&str> =
        relevant.iter().map(|e| e.actor.as_str()).filter(|a| !user_index.contains_key(a)).collect();
    for id in others {
        user_index.insert(id, nodes.len());
        nodes.push(NodeLabel { id: id.to_string(), kind: NodeKind::User });
    }
    let repo_offset = nodes.len();
    for (id, _) in &repos {
        nodes.push(NodeLabel { id: id.to_string(), kind: NodeKind::Repo });
    }
    let n = nodes.len();

    let is_influencer: BTreeSet<usize> = (0..influencers.ranked.len()).collect();
    let covariates = Covariates::new(
        nodes
            .iter()
            .enumerate()
            .map(|(i, label)| match label.kind {
                NodeKind::User => NodeCovariates::user(
                    follower_counts.get(&label.id).copied().unwrap_or(0),
                    is_influencer.contains(&i),
                ),
                NodeKind::Repo => NodeCovariates::repo(),
            })
            .collect(),
    )?;

    let month_pos: BTreeMap<Month, usize> = months.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let mut graphs = vec![DirectedGraph::empty(n); months.len()];

    // stable time order; ties keep log order
    let mut ordered = relevant;
    ordered.sort_by_key(|e| e.timestamp);
    // influencer activity per repo: (timestamp, month position, influencer node)
    let mut influencer_acts: HashMap<&str, Vec<(i64, usize, usize)>> = HashMap::new();
    for e in &ordered {
        if let Some(&i) = user_index.get(e.actor.as_str()) {
            if is_influencer.contains(&i) {
                influencer_acts.entry(e.repo.as_str()).or_default().push((e.timestamp, month_pos[&e.month()], i));
            }
        }
    }
    for e in &ordered {
        let t = month_pos[&e.month()];
        let u = user_index[e.actor.as_str()];
        let r = repo_offset + repo_index[e.repo.as_str()];
        graphs[t].set_edge(NodeId::from(u), NodeId::from(r), true)?;
        if let Some(acts) = influencer_acts.get(e.repo.as_str()) {
            for &(ts, tm, inf) in acts {
                if ts >= e.timestamp {
                    break;
                }
                if inf != u && (tm == t || tm + 1 == t) {
                    graphs[t].set_edge(NodeId::from(inf), NodeId::from(u), true)?;
                }
            }
        }
    }

    let snapshots = months.iter().zip(graphs).map(|(m, g)| Snapshot::new(m.to_string(), g)).collect();
    Ok(InfluenceNetwork {
        network: TemporalNetwork::new(covariates, snapshots)?,
        nodes,
        influencers,
        top_repos,
        events_in_range: ordered.len(),
        events_out_of_range,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionFeatures {
    pub snapshot: String,
    pub influencer: NodeId,
    pub direct_links: usize,
    pub path2_links: usize,
    pub path3_links: usize,
    /// Zero in the first snapshot, which has no predecessor.
    pub influencer_triangles: usize,
}

/// Per-influencer counts behind the triadic statistics, one row per
/// snapshot and influencer.
pub fn extract_connection_features(tn: &TemporalNetwork, influencers: &[NodeId]) -> Result<Vec<ConnectionFeatures>> {
    let cov = tn.covariates();
    for &r in influencers {
        if r.index() >= tn.node_count() {
            return Err(Error::NodeOutOfRange { node: r, n: tn.node_count() });
        }
        if !cov.is_influencer(r) {
            return Err(Error::Data(format!("node {r} is not marked as an influencer")));
        }
    }
    let mut rows = Vec::new();
    for (t, snap) in tn.snapshots().iter().enumerate() {
        let prev = t.checked_sub(1).map(|p| &tn.snapshots()[p].graph);
        for &r in influencers {
            rows.push(ConnectionFeatures {
                snapshot: snap.label.clone(),
                influencer: r,
                direct_links: direct_links_from(&snap.graph, cov, r),
                path2_links: paths2_from(&snap.graph, cov, r),
                path3_links: paths3_from(&snap.graph, cov, r),
                influencer_triangles: prev.map_or(0, |p| triangles_from(&snap.graph, p, r)),
            });
        }
    }
    Ok(rows)
}
