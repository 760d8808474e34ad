//! Per-conversation state.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::questions::Question;
use crate::monitor::Interaction;
use crate::retrieval::SearchResult;
use crate::taxonomy::{Emotion, ThemeId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    Idle,
    Searching,
    Reading {
        tale: String,
        /// Index of the question being answered.
        cursor: usize,
        /// A follow-up to the current question is waiting for its answer.
        followup_pending: bool,
    },
    Chatting,
    /// Collecting a tale submission; `title` is set once given.
    Adding { title: Option<String> },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Idle => "idle",
            Mode::Searching => "searching",
            Mode::Reading { .. } => "reading",
            Mode::Chatting => "chatting",
            Mode::Adding { .. } => "adding",
        }
    }
}

/// A tale listed in a reply.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaleHit {
    pub id: String,
    pub title: String,
    pub score: f64,
    pub emotions: BTreeSet<Emotion>,
    pub themes: BTreeSet<ThemeId>,
}

impl TaleHit {
    pub(crate) fn from_result(r: &SearchResult, title: &str) -> Self {
        Self {
            id: r.id.clone(),
            title: title.to_string(),
            score: r.score,
            emotions: r.emotions.clone(),
            themes: r.themes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reply {
    pub text: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tales: Vec<TaleHit>,
}

impl Reply {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            tales: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub user: String,
    pub registered: bool,
    pub age: Option<u32>,
    pub mode: Mode,
    /// Emotions detected in the current chat episode, with counts.
    pub detected: BTreeMap<Emotion, usize>,
    /// Ids of the latest search or recommendation, in ranked order.
    pub last_results: Vec<String>,
    /// Questions for the tale being read.
    pub questions: Vec<Question>,
    /// Tales read in this session (the persistent read set lives in the
    /// profile of registered users).
    pub session_reads: BTreeSet<String>,
    /// Bot replies not yet paired with a user answer in the log.
    pub pending_prompts: Vec<String>,
    pub transcript: Vec<Interaction>,
    pub closed: bool,
}

impl Session {
    pub fn new(id: String, user: String, registered: bool, age: Option<u32>) -> Self {
        Self {
            id,
            user,
            registered,
            age,
            mode: Mode::Idle,
            detected: BTreeMap::new(),
            last_results: Vec::new(),
            questions: Vec::new(),
            session_reads: BTreeSet::new(),
            pending_prompts: Vec::new(),
            transcript: Vec::new(),
            closed: false,
        }
    }

    /// Read-only summary for API clients.
    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            user: self.user.clone(),
            mode: self.mode.clone(),
            detected: self.detected.clone(),
            last_results: self.last_results.clone(),
            interactions: self.transcript.len(),
            closed: self.closed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    pub id: String,
    pub user: String,
    pub mode: Mode,
    pub detected: BTreeMap<Emotion, usize>,
    pub last_results: Vec<String>,
    pub interactions: usize,
    pub closed: bool,
}
