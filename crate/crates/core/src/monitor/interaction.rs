//! Conversation logs: one XML file per (user, session), one `<interaction>`
//! per line, appended as the conversation happens.
//!
//! ```text
//! <?xml version="1.0" encoding="UTF-8"?>
//! <conversation user="u0001" session="s000001">
//! <interaction><date>25/05/2023 14:41:00</date><user>u0001</user><BOT>…</BOT><answer>…</answer></interaction>
//! </conversation>
//! ```
//!
//! `BOT` stands for the element named by [`BOT_TAG`], which holds what the
//! bot said; `answer` holds the user's reply.
//!
//! The closing tag is written when the session ends; files of sessions that
//! never closed are still readable.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::Serialize;

use super::MonitorError;
use crate::xml::{self, escape_attr, escape_text};

/// Timestamp layout used inside `<date>`.
pub const DATE_FORMAT: &str = "%d/%m/%Y %H:%M:%S";

/// Element holding the chatbot's side of an exchange.
pub const BOT_TAG: &str = "CuentosIE";

const XML_DECL: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Interaction {
    pub date: DateTime<Utc>,
    pub user: String,
    pub prompt: String,
    pub answer: String,
}

impl Interaction {
    /// Serializes to a single `<interaction>` element without trailing newline.
    pub fn to_xml(&self) -> String {
        format!(
            "<interaction><date>{}</date><user>{}</user><{BOT_TAG}>{}</{BOT_TAG}><answer>{}</answer></interaction>",
            self.date.format(DATE_FORMAT),
            escape_text(&self.user),
            escape_text(&self.prompt),
            escape_text(&self.answer),
        )
    }

    fn from_element(el: &xml::Element) -> Result<Self, MonitorError> {
        let bad = |message: String| MonitorError::Log {
            line: el.line,
            message,
        };
        let field = |name: &str| {
            el.child(name)
                .map(|c| c.text.clone())
                .ok_or_else(|| bad(format!("<interaction> lacks <{name}>")))
        };
        let raw_date = field("date")?;
        let date = NaiveDateTime::parse_from_str(&raw_date, DATE_FORMAT)
            .map_err(|e| bad(format!("bad date '{raw_date}': {e}")))?
            .and_utc();
        Ok(Self {
            date,
            user: field("user")?,
            prompt: field(BOT_TAG)?,
            answer: field("answer")?,
        })
    }
}

/// Parses a stream of bare `<interaction>` elements (the excerpt layout,
/// without a root element).
pub fn parse_interactions(src: &str) -> Result<Vec<Interaction>, MonitorError> {
    let wrapped = format!("<log>{src}</log>");
    let root = xml::parse_document(&wrapped, false).map_err(MonitorError::from)?;
    root.children_named("interaction").map(Interaction::from_element).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conversation {
    pub user: String,
    pub session: String,
    /// Whether the closing root tag was present.
    pub closed: bool,
    pub interactions: Vec<Interaction>,
}

/// Parses a full conversation file, tolerating a missing closing tag.
pub fn parse_conversation(src: &str) -> Result<Conversation, MonitorError> {
    let root = xml::parse_document(src, true).map_err(MonitorError::from)?;
    if root.name != "conversation" {
        return Err(MonitorError::Log {
            line: root.line,
            message: format!("expected <conversation>, found <{}>", root.name),
        });
    }
    let interactions = root
        .children_named("interaction")
        .map(Interaction::from_element)
        .collect::<Result<_, _>>()?;
    Ok(Conversation {
        user: root.attr("user").unwrap_or_default().to_string(),
        session: root.attr("session").unwrap_or_default().to_string(),
        closed: src.trim_end().ends_with("</conversation>"),
        interactions,
    })
}

/// File-system-safe directory name for a user id.
pub fn user_dir_name(user: &str) -> String {
    user.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Append-only writer for one session's conversation file.
#[derive(Debug)]
pub struct ConversationLog {
    path: PathBuf,
    file: File,
    user: String,
    closed: bool,
}

impl ConversationLog {
    /// Creates `<root>/<user>/<session>.xml` and writes the header.
    pub fn create(root: &Path, user: &str, session: &str) -> Result<Self, MonitorError> {
        let dir = root.join(user_dir_name(user));
        fs::create_dir_all(&dir).map_err(|e| MonitorError::io(&dir, e))?;
        let path = dir.join(format!("{session}.xml"));
        let mut file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(&path)
            .map_err(|e| MonitorError::io(&path, e))?;
        let header = format!(
            "{XML_DECL}<conversation user=\"{}\" session=\"{}\">\n",
            escape_attr(user),
            escape_attr(session)
        );
        file.write_all(header.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| MonitorError::io(&path, e))?;
        Ok(Self {
            path,
            file,
            user: user.to_string(),
            closed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn append(&mut self, interaction: &Interaction) -> Result<(), MonitorError> {
        if self.closed {
            return Err(MonitorError::LogClosed(self.path.display().to_string()));
        }
        let mut line = interaction.to_xml();
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| MonitorError::io(&self.path, e))
    }

    /// Writes the closing root tag. Further appends fail.
    pub fn close(&mut self) -> Result<(), MonitorError> {
        if self.closed {
            return Ok(());
        }
        self.file
            .write_all(b"</conversation>\n")
            .and_then(|_| self.file.flush())
            .map_err(|e| MonitorError::io(&self.path, e))?;
        self.closed = true;
        Ok(())
    }
}
