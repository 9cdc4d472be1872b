//! Access-log ingestion: NCSA Common/Combined parsing and entry cleaning.

use std::collections::BTreeSet;
use std::io::BufRead;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which log line layout to accept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogFormat {
    Common,
    Combined,
    #[default]
    Auto,
}

impl LogFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "common" => Some(Self::Common),
            "combined" => Some(Self::Combined),
            "auto" => Some(Self::Auto),
            _ => None,
        }
    }
}

/// One parsed access-log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    #[serde(rename = "ip")]
    pub client_ip: String,
    pub identity: Option<String>,
    pub auth_user: Option<String>,
    /// Original zone offset is preserved; use [`LogEntry::ts_utc`] for
    /// timeline arithmetic.
    #[serde(rename = "ts")]
    pub timestamp: DateTime<FixedOffset>,
    pub method: String,
    pub path: String,
    pub protocol: String,
    pub status: u16,
    pub bytes: Option<u64>,
    pub referrer: Option<String>,
    #[serde(rename = "agent")]
    pub user_agent: Option<String>,
}

impl LogEntry {
    pub fn ts_utc(&self) -> DateTime<chrono::Utc> {
        self.timestamp.with_timezone(&chrono::Utc)
    }

    /// Path with any query string stripped.
    pub fn path_without_query(&self) -> &str {
        self.path.split('?').next().unwrap_or(&self.path)
    }

    /// Lowercased file extension of the query-stripped path, if any.
    pub fn extension(&self) -> Option<String> {
        let p = self.path_without_query();
        let last_seg = p.rsplit('/').next().unwrap_or(p);
        let (_, ext) = last_seg.rsplit_once('.')?;
        if ext.is_empty() {
            None
        } else {
            Some(ext.to_ascii_lowercase())
        }
    }

    /// Re-serialize as a log line in the given format. `Auto` picks Combined
    /// when either of the two Combined fields is present.
    pub fn to_line(&self, format: LogFormat) -> String {
        let dash = |v: &Option<String>| v.clone().unwrap_or_else(|| "-".to_string());
        let bytes = self.bytes.map_or_else(|| "-".to_string(), |b| b.to_string());
        let mut line = format!(
            "{} {} {} [{}] \"{} {} {}\" {} {}",
            self.client_ip,
            dash(&self.identity),
            dash(&self.auth_user),
            self.timestamp.format("%d/%b/%Y:%H:%M:%S %z"),
            self.method,
            self.path,
            self.protocol,
            self.status,
            bytes,
        );
        let combined = match format {
            LogFormat::Common => false,
            LogFormat::Combined => true,
            LogFormat::Auto => self.referrer.is_some() || self.user_agent.is_some(),
        };
        if combined {
            line.push_str(&format!(
                " \"{}\" \"{}\"",
                dash(&self.referrer),
                dash(&self.user_agent)
            ));
        }
        line
    }
}

/// A line that does not match the expected log format. Carries the byte
/// offset within the line where parsing gave up. Malformed lines are counted
/// and skipped; they never abort the stream.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed log line at byte {offset}: {reason}")]
pub struct MalformedLine {
    pub offset: usize,
    pub reason: String,
}

struct Cursor<'a> {
    line: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn fail<T>(&self, reason: impl Into<String>) -> Result<T, MalformedLine> {
        Err(MalformedLine { offset: self.pos, reason: reason.into() })
    }

    fn rest(&self) -> &'a str {
        &self.line[self.pos..]
    }

    fn at_end(&self) -> bool {
        self.rest().trim_end().is_empty()
    }

    fn skip_spaces(&mut self) {
        while self.rest().starts_with(' ') {
            self.pos += 1;
        }
    }

    fn token(&mut self, what: &str) -> Result<&'a str, MalformedLine> {
        self.skip_spaces();
        let rest = self.rest();
        let end = rest.find(' ').unwrap_or(rest.len());
        let tok = rest[..end].trim_end();
        if tok.is_empty() {
            return self.fail(format!("missing {what}"));
        }
        self.pos += end;
        Ok(tok)
    }

    fn delimited(&mut self, open: char, close: char, what: &str) -> Result<&'a str, MalformedLine> {
        self.skip_spaces();
        if !self.rest().starts_with(open) {
            return self.fail(format!("expected '{open}' before {what}"));
        }
        self.pos += open.len_utf8();
        let rest = self.rest();
        match rest.find(close) {
            Some(end) => {
                let inner = &rest[..end];
                self.pos += end + close.len_utf8();
                Ok(inner)
            }
            None => self.fail(format!("unterminated {what}")),
        }
    }
}

fn optional(tok: &str) -> Option<String> {
    if tok == "-" {
        None
    } else {
        Some(tok.to_string())
    }
}

/// Parse one NCSA Common or Combined log line, auto-detecting the format.
pub fn parse_log_line(line: &str) -> Result<LogEntry, MalformedLine> {
    parse_log_line_with(line, LogFormat::Auto)
}

/// Parse one log line, enforcing the requested format.
pub fn parse_log_line_with(line: &str, format: LogFormat) -> Result<LogEntry, MalformedLine> {
    let mut c = Cursor { line, pos: 0 };
    let client_ip = c.token("client host")?.to_string();
    let identity = optional(c.token("identity")?);
    let auth_user = optional(c.token("auth user")?);
    let ts_raw = c.delimited('[', ']', "timestamp")?;
    let ts_pos = c.pos;
    let timestamp = DateTime::parse_from_str(ts_raw, "%d/%b/%Y:%H:%M:%S %z").map_err(|e| {
        MalformedLine { offset: ts_pos, reason: format!("bad timestamp {ts_raw:?}: {e}") }
    })?;
    let request = c.delimited('"', '"', "request")?;
    let req_pos = c.pos;
    let mut parts = request.split(' ');
    let (method, path, protocol) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some(m), Some(p), Some(v), None) if !m.is_empty() && !p.is_empty() && !v.is_empty() => {
            (m.to_string(), p.to_string(), v.to_string())
        }
        _ => {
            return Err(MalformedLine {
                offset: req_pos,
                reason: format!("bad request {request:?}"),
            })
        }
    };
    let status_tok = c.token("status")?;
    let status: u16 = match status_tok.parse() {
        Ok(s) if (100..=599).contains(&s) => s,
        _ => return c.fail(format!("bad status {status_tok:?}")),
    };
    let bytes_tok = c.token("bytes")?;
    let bytes = if bytes_tok == "-" {
        None
    } else {
        match bytes_tok.parse::<u64>() {
            Ok(b) => Some(b),
            Err(_) => return c.fail(format!("bad byte count {bytes_tok:?}")),
        }
    };

    let has_more = !c.at_end();
    let (referrer, user_agent) = match (format, has_more) {
        (LogFormat::Common, true) => return c.fail("trailing content after Common-format fields"),
        (LogFormat::Common, false) | (LogFormat::Auto, false) => (None, None),
        (LogFormat::Combined, false) => return c.fail("missing referrer and user agent"),
        (LogFormat::Combined, true) | (LogFormat::Auto, true) => {
            let referrer = optional(c.delimited('"', '"', "referrer")?);
            let agent = optional(c.delimited('"', '"', "user agent")?);
            if !c.at_end() {
                return c.fail("trailing content after Combined-format fields");
            }
            (referrer, agent)
        }
    };

    Ok(LogEntry {
        client_ip,
        identity,
        auth_user,
        timestamp,
        method,
        path,
        protocol,
        status,
        bytes,
        referrer,
        user_agent,
    })
}

/// Predicates applied by [`clean_entries`]. An entry survives iff its status
/// is allowed, its extension is not suppressed, its method is not suppressed
/// and its user agent matches no robot substring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningPolicy {
    /// Lowercase extensions, matched case-insensitively against the path
    /// with query string stripped.
    pub suppressed_extensions: BTreeSet<String>,
    /// Inclusive status ranges; `[[200, 399]]` allows 2xx and 3xx.
    pub allowed_status: Vec<(u16, u16)>,
    pub suppressed_methods: BTreeSet<String>,
    /// Case-insensitive substrings of the user agent.
    pub robot_agent_substrings: BTreeSet<String>,
}

impl Default for CleaningPolicy {
    fn default() -> Self {
        let ext = ["gif", "jpg", "jpeg", "png", "ico", "css", "js", "swf"];
        let methods = ["HEAD", "PUT", "DELETE", "OPTIONS", "TRACE", "CONNECT", "PATCH"];
        let robots = ["bot", "crawler", "spider"];
        Self {
            suppressed_extensions: ext.iter().map(|s| s.to_string()).collect(),
            allowed_status: vec![(200, 399)],
            suppressed_methods: methods.iter().map(|s| s.to_string()).collect(),
            robot_agent_substrings: robots.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl CleaningPolicy {
    pub fn keeps(&self, e: &LogEntry) -> bool {
        let status_ok = self
            .allowed_status
            .iter()
            .any(|&(lo, hi)| (lo..=hi).contains(&e.status));
        if !status_ok {
            return false;
        }
        if let Some(ext) = e.extension() {
            if self.suppressed_extensions.contains(&ext) {
                return false;
            }
        }
        if self.suppressed_methods.contains(&e.method) {
            return false;
        }
        if let Some(agent) = &e.user_agent {
            let agent = agent.to_ascii_lowercase();
            if self
                .robot_agent_substrings
                .iter()
                .any(|sub| agent.contains(&sub.to_ascii_lowercase()))
            {
                return false;
            }
        }
        true
    }
}

/// Counters for one ingest pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub lines_read: usize,
    pub lines_malformed: usize,
    pub entries_parsed: usize,
    pub entries_after_cleaning: usize,
    pub distinct_urls: usize,
}

fn count_distinct_urls(entries: &[LogEntry]) -> usize {
    entries.iter().map(|e| e.path.as_str()).collect::<BTreeSet<_>>().len()
}

/// Apply the cleaning policy, preserving input order. The returned stats
/// treat the input as the full parsed stream (no malformed lines).
pub fn clean_entries(
    entries: Vec<LogEntry>,
    policy: &CleaningPolicy,
) -> (Vec<LogEntry>, IngestStats) {
    let parsed = entries.len();
    let kept: Vec<LogEntry> = entries.into_iter().filter(|e| policy.keeps(e)).collect();
    let stats = IngestStats {
        lines_read: parsed,
        lines_malformed: 0,
        entries_parsed: parsed,
        entries_after_cleaning: kept.len(),
        distinct_urls: count_distinct_urls(&kept),
    };
    (kept, stats)
}

/// Parse and clean a whole log stream. Malformed lines are counted and
/// skipped.
pub fn ingest<R: BufRead>(
    reader: R,
    format: LogFormat,
    policy: &CleaningPolicy,
) -> std::io::Result<(Vec<LogEntry>, IngestStats)> {
    let mut stats = IngestStats::default();
    let mut entries = Vec::new();
    for line in reader.lines() {
        let line = line?;
        stats.lines_read += 1;
        if line.trim().is_empty() {
            stats.lines_malformed += 1;
            continue;
        }
        match parse_log_line_with(&line, format) {
            Ok(e) => entries.push(e),
            Err(_) => stats.lines_malformed += 1,
        }
    }
    stats.entries_parsed = entries.len();
    let kept: Vec<LogEntry> = entries.into_iter().filter(|e| policy.keeps(e)).collect();
    stats.entries_after_cleaning = kept.len();
    stats.distinct_urls = count_distinct_urls(&kept);
    Ok((kept, stats))
}
