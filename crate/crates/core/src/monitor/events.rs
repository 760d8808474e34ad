//! Append-only CSV event logs: emotion selections and tale reads.
//!
//! `selections.csv`: `timestamp,user,emotion,context`
//! `reads.csv`:      `timestamp,user,tale`
//!
//! Timestamps are RFC 3339 in UTC. Every field is an identifier produced
//! by the engine, so no quoting is needed.

use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::MonitorError;
use crate::taxonomy::Emotion;

pub const SELECTIONS_HEADER: &str = "timestamp,user,emotion,context";
pub const READS_HEADER: &str = "timestamp,user,tale";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionContext {
    /// The user filtered a search by this emotion.
    SearchFilter,
    /// A recommended tale matched this detected emotion.
    Recommendation,
    /// The emotion classifier found this emotion salient in a chat turn.
    ChatDetection,
}

impl SelectionContext {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionContext::SearchFilter => "search_filter",
            SelectionContext::Recommendation => "recommendation",
            SelectionContext::ChatDetection => "chat_detection",
        }
    }
}

impl fmt::Display for SelectionContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionContext {
    type Err = MonitorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            SelectionContext::SearchFilter,
            SelectionContext::Recommendation,
            SelectionContext::ChatDetection,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
        .ok_or_else(|| MonitorError::BadEvent(format!("unknown context '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionEvent {
    pub timestamp: DateTime<Utc>,
    pub user: String,
    pub emotion: Emotion,
    pub context: SelectionContext,
}

impl SelectionEvent {
    /// Builds an event from an emotion name, rejecting names outside the registry.
    pub fn new(timestamp: DateTime<Utc>, user: &str, emotion: &str, context: SelectionContext) -> Result<Self, MonitorError> {
        let emotion = emotion
            .parse()
            .map_err(|_| MonitorError::BadEvent(format!("unknown emotion '{emotion}'")))?;
        Ok(Self {
            timestamp,
            user: user.to_string(),
            emotion,
            context,
        })
    }

    pub fn to_csv(&self) -> String {
        format!("{},{},{},{}", stamp(&self.timestamp), self.user, self.emotion.id(), self.context)
    }

    pub fn from_csv(line: &str) -> Result<Self, MonitorError> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(MonitorError::BadEvent(format!("expected 4 fields: '{line}'")));
        }
        Self::new(parse_stamp(f[0])?, f[1], f[2], f[3].parse()?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadEvent {
    pub timestamp: DateTime<Utc>,
    pub user: String,
    pub tale: String,
}

impl ReadEvent {
    pub fn to_csv(&self) -> String {
        format!("{},{},{}", stamp(&self.timestamp), self.user, self.tale)
    }

    pub fn from_csv(line: &str) -> Result<Self, MonitorError> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(MonitorError::BadEvent(format!("expected 3 fields: '{line}'")));
        }
        Ok(Self {
            timestamp: parse_stamp(f[0])?,
            user: f[1].to_string(),
            tale: f[2].to_string(),
        })
    }
}

fn stamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_stamp(s: &str) -> Result<DateTime<Utc>, MonitorError> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| MonitorError::BadEvent(format!("bad timestamp '{s}': {e}")))
}

/// An append-only CSV file with a fixed header line.
#[derive(Debug)]
pub struct CsvLog {
    path: PathBuf,
    file: File,
}

impl CsvLog {
    pub fn open(path: &Path, header: &str) -> Result<Self, MonitorError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| MonitorError::io(parent, e))?;
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| MonitorError::io(path, e))?;
        let empty = file.metadata().map_err(|e| MonitorError::io(path, e))?.len() == 0;
        if empty {
            writeln!(file, "{header}").map_err(|e| MonitorError::io(path, e))?;
        }
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append_line(&mut self, line: &str) -> Result<(), MonitorError> {
        self.file
            .write_all(format!("{line}\n").as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| MonitorError::io(&self.path, e))
    }

    /// Data lines (header skipped, blank lines ignored) parsed with `parse`.
    pub fn read_all<T>(path: &Path, parse: impl Fn(&str) -> Result<T, MonitorError>) -> Result<Vec<T>, MonitorError> {
        let content = match fs::read_to_string(path) {
            Ok(c) => c,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(MonitorError::io(path, e)),
        };
        content
            .lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| parse(l.trim_end()))
            .collect()
    }
}
