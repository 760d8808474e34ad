//! Persistence and analytics: user registry, XML conversation logs,
//! selection statistics, timelines and risk alarms.
//!
//! Data directory layout:
//!
//! ```text
//! users/<id>.json
//! conversations/<user>/<session>.xml
//! selections.csv
//! reads.csv
//! ```

mod events;
mod interaction;
mod risk;
mod stats;
mod users;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Duration, Utc};
use serde::Serialize;

pub use events::{CsvLog, ReadEvent, SelectionContext, SelectionEvent, READS_HEADER, SELECTIONS_HEADER};
pub use interaction::{
    parse_conversation, parse_interactions, user_dir_name, Conversation, ConversationLog, Interaction, BOT_TAG,
    DATE_FORMAT,
};
pub use risk::{RiskCategory, RiskFlag, RiskLexicon};
pub use stats::{emotion_stats, parse_window, timeline, valence_split, EmotionStats, Segment, TimelineBucket, ValenceSplit};
pub use users::{AgeBucket, Gender, UserProfile, UserRegistry, ANONYMOUS_USER, MAX_AGE, MIN_AGE};

use crate::clock::Clock;
use crate::taxonomy::Emotion;
use crate::xml::XmlError;

#[derive(Debug, thiserror::Error)]
pub enum MonitorError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("conversation log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("conversation log {0} is closed")]
    LogClosed(String),
    #[error("profile {path}: {message}")]
    Profile { path: String, message: String },
    #[error("age must lie in [{MIN_AGE}, {MAX_AGE}] (got {0})")]
    BadAge(u32),
    #[error("unknown user '{0}'")]
    UnknownUser(String),
    #[error("monitoring is only performed on registered users ('{0}' is not registered)")]
    NotRegistered(String),
    #[error("bad event: {0}")]
    BadEvent(String),
    #[error("bad segment: {0}")]
    BadSegment(String),
    #[error("bad window '{0}' (expected e.g. 1d, 12h, 30m)")]
    BadWindow(String),
    #[error("risk lexicon: {0}")]
    RiskLexicon(String),
}

impl MonitorError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        MonitorError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<XmlError> for MonitorError {
    fn from(e: XmlError) -> Self {
        MonitorError::Log {
            line: e.line,
            message: e.message,
        }
    }
}

/// A registered user with a pending alarm, as listed for supervisors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Alert {
    pub user: String,
    pub age: u32,
    pub gender: Gender,
    pub alarm: RiskFlag,
}

/// Shared monitoring store. Every mutating call persists before returning.
pub struct Monitor {
    dir: PathBuf,
    clock: Arc<dyn Clock>,
    risk: RiskLexicon,
    users: RwLock<UserRegistry>,
    selections: RwLock<Vec<SelectionEvent>>,
    selection_log: Mutex<CsvLog>,
    read_log: Mutex<CsvLog>,
    next_session: AtomicU64,
}

impl std::fmt::Debug for Monitor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Monitor").field("dir", &self.dir).finish_non_exhaustive()
    }
}

fn session_number(name: &str) -> Option<u64> {
    name.strip_suffix(".xml")?.strip_prefix('s')?.parse().ok()
}

fn max_session_number(conversations: &Path) -> Result<u64, MonitorError> {
    let mut max = 0;
    let Ok(users) = fs::read_dir(conversations) else {
        return Ok(0);
    };
    for user in users {
        let user = user.map_err(|e| MonitorError::io(conversations, e))?.path();
        if !user.is_dir() {
            continue;
        }
        for file in fs::read_dir(&user).map_err(|e| MonitorError::io(&user, e))? {
            let file = file.map_err(|e| MonitorError::io(&user, e))?;
            if let Some(n) = file.file_name().to_str().and_then(session_number) {
                max = max.max(n);
            }
        }
    }
    Ok(max)
}

impl Monitor {
    pub fn open(dir: &Path, risk: RiskLexicon, clock: Arc<dyn Clock>) -> Result<Self, MonitorError> {
        fs::create_dir_all(dir).map_err(|e| MonitorError::io(dir, e))?;
        let users = UserRegistry::open(&dir.join("users"))?;
        let selections_path = dir.join("selections.csv");
        let selections = CsvLog::read_all(&selections_path, SelectionEvent::from_csv)?;
        let selection_log = CsvLog::open(&selections_path, SELECTIONS_HEADER)?;
        let read_log = CsvLog::open(&dir.join("reads.csv"), READS_HEADER)?;
        let next_session = max_session_number(&dir.join("conversations"))? + 1;
        Ok(Self {
            dir: dir.to_path_buf(),
            clock,
            risk,
            users: RwLock::new(users),
            selections: RwLock::new(selections),
            selection_log: Mutex::new(selection_log),
            read_log: Mutex::new(read_log),
            next_session: AtomicU64::new(next_session),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    pub fn risk_lexicon(&self) -> &RiskLexicon {
        &self.risk
    }

    pub fn register(&self, age: u32, gender: Gender, visible_to_supervisor: bool) -> Result<UserProfile, MonitorError> {
        self.users.write().expect("users lock").register(age, gender, visible_to_supervisor)
    }

    pub fn profile(&self, id: &str) -> Option<UserProfile> {
        self.users.read().expect("users lock").get(id).cloned()
    }

    pub fn is_registered(&self, id: &str) -> bool {
        self.users.read().expect("users lock").is_registered(id)
    }

    pub fn profiles(&self) -> Vec<UserProfile> {
        self.users.read().expect("users lock").iter().cloned().collect()
    }

    /// Adds `tale` to a registered user's read set and logs the read.
    /// Returns whether the tale was new to the set; non-registered users
    /// are not persisted.
    pub fn mark_read(&self, user: &str, tale: &str) -> Result<bool, MonitorError> {
        if !self.is_registered(user) {
            return Ok(false);
        }
        let inserted = self
            .users
            .write()
            .expect("users lock")
            .update(user, |p| p.read_tales.insert(tale.to_string()))?;
        let ev = ReadEvent {
            timestamp: self.now(),
            user: user.to_string(),
            tale: tale.to_string(),
        };
        self.read_log.lock().expect("read log lock").append_line(&ev.to_csv())?;
        Ok(inserted)
    }

    pub fn reads(&self) -> Result<Vec<ReadEvent>, MonitorError> {
        CsvLog::read_all(&self.dir.join("reads.csv"), ReadEvent::from_csv)
    }

    /// Appends a selection event for a registered user; events for anyone
    /// else are not monitored and return `false`.
    pub fn record_selection(&self, event: SelectionEvent) -> Result<bool, MonitorError> {
        if !self.is_registered(&event.user) {
            return Ok(false);
        }
        let mut events = self.selections.write().expect("selections lock");
        self.selection_log
            .lock()
            .expect("selection log lock")
            .append_line(&event.to_csv())?;
        events.push(event);
        Ok(true)
    }

    /// Timestamped selection of `emotion` by `user` in `context`.
    pub fn select(&self, user: &str, emotion: Emotion, context: SelectionContext) -> Result<bool, MonitorError> {
        self.record_selection(SelectionEvent {
            timestamp: self.now(),
            user: user.to_string(),
            emotion,
            context,
        })
    }

    pub fn selections(&self) -> Vec<SelectionEvent> {
        self.selections.read().expect("selections lock").clone()
    }

    pub fn emotion_stats(&self, segment: Segment) -> EmotionStats {
        let users = self.users.read().expect("users lock");
        let events = self.selections.read().expect("selections lock");
        emotion_stats(events.iter(), |id| users.get(id), segment)
    }

    pub fn timeline(&self, user: &str, window: Duration) -> Result<Vec<TimelineBucket>, MonitorError> {
        if !self.is_registered(user) {
            return Err(MonitorError::NotRegistered(user.to_string()));
        }
        let events = self.selections.read().expect("selections lock");
        Ok(timeline(events.iter(), user, window))
    }

    /// Runs risk detection over a post. A match by a registered user is
    /// stored as a pending flag on their profile.
    pub fn scan_risk(&self, user: &str, text: &str) -> Result<Option<RiskFlag>, MonitorError> {
        let Some(flag) = self.risk.flag(text, self.now()) else {
            return Ok(None);
        };
        if self.is_registered(user) {
            let stored = flag.clone();
            self.users
                .write()
                .expect("users lock")
                .update(user, |p| p.flags.push(stored))?;
        }
        Ok(Some(flag))
    }

    /// Highest-severity unacknowledged flag of a registered user.
    pub fn check_alarm(&self, user: &str) -> Option<RiskFlag> {
        self.users
            .read()
            .expect("users lock")
            .get(user)
            .and_then(|p| p.pending_alarm().cloned())
    }

    /// Marks every pending flag acknowledged, keeping the history.
    /// Returns how many flags were cleared.
    pub fn acknowledge_alarms(&self, user: &str) -> Result<usize, MonitorError> {
        self.users.write().expect("users lock").update(user, |p| {
            let mut n = 0;
            for f in p.flags.iter_mut().filter(|f| !f.acknowledged) {
                f.acknowledged = true;
                n += 1;
            }
            n
        })
    }

    /// Pending alarms of users who allowed supervisors to see them.
    pub fn alerts(&self) -> Vec<Alert> {
        self.users
            .read()
            .expect("users lock")
            .iter()
            .filter(|p| p.visible_to_supervisor)
            .filter_map(|p| {
                p.pending_alarm().map(|a| Alert {
                    user: p.id.clone(),
                    age: p.age,
                    gender: p.gender,
                    alarm: a.clone(),
                })
            })
            .collect()
    }

    pub fn next_session_id(&self) -> String {
        format!("s{:06}", self.next_session.fetch_add(1, Ordering::SeqCst))
    }

    pub fn conversations_dir(&self) -> PathBuf {
        self.dir.join("conversations")
    }

    pub fn open_log(&self, user: &str, session: &str) -> Result<ConversationLog, MonitorError> {
        ConversationLog::create(&self.conversations_dir(), user, session)
    }

    /// Every stored conversation of `user`, ordered by session id.
    pub fn conversations(&self, user: &str) -> Result<Vec<Conversation>, MonitorError> {
        let dir = self.conversations_dir().join(user_dir_name(user));
        let mut paths: Vec<PathBuf> = match fs::read_dir(&dir) {
            Ok(entries) => entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "xml"))
                .collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(MonitorError::io(&dir, e)),
        };
        paths.sort();
        paths
            .iter()
            .map(|p| {
                let src = fs::read_to_string(p).map_err(|e| MonitorError::io(p, e))?;
                parse_conversation(&src)
            })
            .collect()
    }
}
