//! User identification and time-windowed session splitting.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logingest::LogEntry;

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("input is empty")]
    EmptyInput,
}

/// User identification key: exact string equality on (client_ip, user_agent).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserKey {
    pub client_ip: String,
    pub user_agent: Option<String>,
}

impl UserKey {
    pub fn of(entry: &LogEntry) -> Self {
        Self { client_ip: entry.client_ip.clone(), user_agent: entry.user_agent.clone() }
    }
}

/// One page request inside a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub url: String,
    pub ts: DateTime<Utc>,
    pub bytes: Option<u64>,
}

/// Ordered URL hits by one user with inter-hit gaps below the timeout.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub user: UserKey,
    pub hits: Vec<Hit>,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl Session {
    pub fn distinct_url_count(&self) -> usize {
        self.hits.iter().map(|h| h.url.as_str()).collect::<std::collections::BTreeSet<_>>().len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionizerConfig {
    pub timeout: Duration,
    pub min_hits: usize,
}

impl Default for SessionizerConfig {
    fn default() -> Self {
        Self { timeout: Duration::minutes(30), min_hits: 1 }
    }
}

/// Group entries by (ip, agent) and sort each trace by timestamp, stable on
/// ties so input-file order is preserved.
pub fn identify_users(entries: &[LogEntry]) -> BTreeMap<UserKey, Vec<LogEntry>> {
    let mut users: BTreeMap<UserKey, Vec<LogEntry>> = BTreeMap::new();
    for e in entries {
        users.entry(UserKey::of(e)).or_default().push(e.clone());
    }
    for trace in users.values_mut() {
        trace.sort_by_key(|e| e.ts_utc());
    }
    users
}

/// Split one user's timestamp-sorted trace at gaps exceeding the timeout.
/// Sessions shorter than `min_hits` are dropped.
pub fn split_sessions(trace: &[LogEntry], cfg: &SessionizerConfig) -> Vec<Session> {
    let mut sessions = Vec::new();
    let mut current: Vec<&LogEntry> = Vec::new();
    for e in trace {
        if let Some(prev) = current.last() {
            if e.ts_utc() - prev.ts_utc() > cfg.timeout {
                push_session(&mut sessions, &current, cfg.min_hits);
                current.clear();
            }
        }
        current.push(e);
    }
    push_session(&mut sessions, &current, cfg.min_hits);
    sessions
}

fn push_session(out: &mut Vec<Session>, entries: &[&LogEntry], min_hits: usize) {
    if entries.is_empty() || entries.len() < min_hits {
        return;
    }
    let hits: Vec<Hit> = entries
        .iter()
        .map(|e| Hit { url: e.path.clone(), ts: e.ts_utc(), bytes: e.bytes })
        .collect();
    out.push(Session {
        user: UserKey::of(entries[0]),
        start: hits.first().unwrap().ts,
        end: hits.last().unwrap().ts,
        hits,
    });
}

/// Full sessionization: identify users, split each trace, merge in
/// (UserKey, start-time) order.
pub fn sessionize(entries: &[LogEntry], cfg: &SessionizerConfig) -> Vec<Session> {
    let mut sessions = Vec::new();
    for trace in identify_users(entries).values() {
        sessions.extend(split_sessions(trace, cfg));
    }
    sessions
}

/// Fraction of sessions accessing at least `x` distinct URLs, for each
/// `x ≥ 1` up to the maximum observed count. Non-increasing, starts at 1.
pub fn session_length_distribution(
    sessions: &[Session],
) -> Result<Vec<(usize, f64)>, SessionError> {
    if sessions.is_empty() {
        return Err(SessionError::EmptyInput);
    }
    let counts: Vec<usize> = sessions.iter().map(Session::distinct_url_count).collect();
    let max = *counts.iter().max().unwrap();
    let total = sessions.len() as f64;
    Ok((1..=max)
        .map(|x| (x, counts.iter().filter(|&&c| c >= x).count() as f64 / total))
        .collect())
}

/// NDJSON wire form of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub user_ip: String,
    pub user_agent: Option<String>,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub hits: Vec<Hit>,
}

impl From<&Session> for SessionRecord {
    fn from(s: &Session) -> Self {
        Self {
            user_ip: s.user.client_ip.clone(),
            user_agent: s.user.user_agent.clone(),
            start: s.start,
            end: s.end,
            hits: s.hits.clone(),
        }
    }
}

impl From<SessionRecord> for Session {
    fn from(r: SessionRecord) -> Self {
        Self {
            user: UserKey { client_ip: r.user_ip, user_agent: r.user_agent },
            start: r.start,
            end: r.end,
            hits: r.hits,
        }
    }
}
