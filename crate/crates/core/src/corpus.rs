//! Tales, quotes and emotion cards, their on-disk XML layout, and the
//! submit/review workflow for user-contributed tales.
//!
//! A corpus directory holds `tales.xml`, `quotes.xml`, `emotions.xml` and
//! `themes.txt`. Only approved tales are visible to retrieval.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::taxonomy::{Emotion, EmotionCard, ThemeId, ThemeRegistry};
use crate::xml::{self, escape_attr, escape_text, Element};

pub const TALES_FILE: &str = "tales.xml";
pub const QUOTES_FILE: &str = "quotes.xml";
pub const CARDS_FILE: &str = "emotions.xml";
pub const THEMES_FILE: &str = "themes.txt";

pub const MAX_AGE: u32 = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaleStatus {
    Approved,
    Pending,
    Rejected,
}

impl TaleStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TaleStatus::Approved => "approved",
            TaleStatus::Pending => "pending",
            TaleStatus::Rejected => "rejected",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "approved" => Some(TaleStatus::Approved),
            "pending" => Some(TaleStatus::Pending),
            "rejected" => Some(TaleStatus::Rejected),
            _ => None,
        }
    }
}

impl fmt::Display for TaleStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tale {
    pub id: String,
    pub title: String,
    pub body: String,
    pub emotions: BTreeSet<Emotion>,
    pub themes: BTreeSet<ThemeId>,
    pub source_url: Option<String>,
    pub min_age: Option<u32>,
    pub status: TaleStatus,
    pub submitted_by: Option<String>,
}

impl Tale {
    pub fn is_approved(&self) -> bool {
        self.status == TaleStatus::Approved
    }

    /// Whether a reader of `age` may open the tale. Unknown age only passes
    /// tales without an age floor.
    pub fn suitable_for(&self, age: Option<u32>) -> bool {
        match (self.min_age, age) {
            (None, _) => true,
            (Some(floor), Some(age)) => age >= floor,
            (Some(floor), None) => floor == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quote {
    pub id: String,
    pub text: String,
    pub emotions: BTreeSet<Emotion>,
}

/// A user-contributed tale before review.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct TaleDraft {
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub source_url: Option<String>,
    #[serde(default)]
    pub min_age: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReviewDecision {
    Approve {
        emotions: BTreeSet<Emotion>,
        themes: BTreeSet<ThemeId>,
    },
    Reject,
}

/// One invariant violation found while validating a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub file: &'static str,
    pub item: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.item {
            Some(id) => write!(f, "{}: '{}': {}", self.file, id, self.message),
            None => write!(f, "{}: {}", self.file, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("corpus validation failed:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown tale '{0}'")]
    UnknownTale(String),
    #[error("tale '{id}' is {status}, only pending tales can be reviewed")]
    NotPending { id: String, status: TaleStatus },
    #[error("approval of tale '{0}' needs at least one emotion and one theme")]
    MissingTags(String),
    #[error("theme '{0}' is not in the registry")]
    UnknownTheme(String),
    #[error("a tale needs a non-empty {0}")]
    EmptyField(&'static str),
    #[error("min_age {0} is outside 0..=120")]
    BadAge(u32),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StatusCounts {
    pub approved: usize,
    pub pending: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub tales: BTreeMap<String, Tale>,
    pub quotes: BTreeMap<String, Quote>,
    pub cards: BTreeMap<Emotion, EmotionCard>,
    pub themes: ThemeRegistry,
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_file(file: &str, src: &str, root: &str) -> Result<Element, CorpusError> {
    let el = xml::parse_document(src, false).map_err(|e| CorpusError::Parse {
        file: file.to_string(),
        line: e.line,
        message: e.message,
    })?;
    if el.name != root {
        return Err(CorpusError::Parse {
            file: file.to_string(),
            line: el.line,
            message: format!("expected root <{root}>, found <{}>", el.name),
        });
    }
    Ok(el)
}

/// Parsed documents before invariant checks. Unknown tag names are
/// collected as violations rather than parse errors.
struct Parsed {
    corpus: Corpus,
    violations: Vec<Violation>,
}

fn parse_emotions(
    parent: Option<&Element>,
    tag: &str,
    file: &'static str,
    item: &str,
    violations: &mut Vec<Violation>,
) -> BTreeSet<Emotion> {
    let mut out = BTreeSet::new();
    for e in parent.into_iter().flat_map(|p| p.children_named(tag)) {
        match e.text.trim().parse::<Emotion>() {
            Ok(em) => {
                out.insert(em);
            }
            Err(err) => violations.push(Violation {
                file,
                item: Some(item.to_string()),
                message: err.to_string(),
            }),
        }
    }
    out
}

fn parse_tales(root: &Element, themes: &ThemeRegistry, p: &mut Parsed) -> Result<(), CorpusError> {
    for el in root.children_named("tale") {
        let parse_err = |message: String| CorpusError::Parse {
            file: TALES_FILE.into(),
            line: el.line,
            message,
        };
        let id = el
            .attr("id")
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| parse_err("tale without id".into()))?
            .to_string();
        let status_raw = el.attr("status").unwrap_or("approved");
        let status = TaleStatus::parse(status_raw)
            .ok_or_else(|| parse_err(format!("tale '{id}': bad status '{status_raw}'")))?;
        let min_age = match el.attr("min_age").map(str::trim).filter(|s| !s.is_empty()) {
            None => None,
            Some(s) => Some(
                s.parse::<u32>()
                    .map_err(|_| parse_err(format!("tale '{id}': bad min_age '{s}'")))?,
            ),
        };
        let emotions = parse_emotions(el.child("emotions"), "e", TALES_FILE, &id, &mut p.violations);
        let mut tale_themes = BTreeSet::new();
        for t in el.child("themes").into_iter().flat_map(|t| t.children_named("t")) {
            match ThemeId::new(&t.text).filter(|t| themes.contains(t)) {
                Some(theme) => {
                    tale_themes.insert(theme);
                }
                None => p.violations.push(Violation {
                    file: TALES_FILE,
                    item: Some(id.clone()),
                    message: format!("theme '{}' is not in the registry", t.text.trim()),
                }),
            }
        }
        let tale = Tale {
            id: id.clone(),
            title: el.child_text("title").unwrap_or("").trim().to_string(),
            body: el.child_text("body").unwrap_or("").trim().to_string(),
            emotions,
            themes: tale_themes,
            source_url: el
                .child_text("source_url")
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from),
            min_age,
            status,
            submitted_by: el.attr("submitted_by").map(String::from),
        };
        if p.corpus.tales.insert(id.clone(), tale).is_some() {
            p.violations.push(Violation {
                file: TALES_FILE,
                item: Some(id),
                message: "duplicate tale id".into(),
            });
        }
    }
    Ok(())
}

fn parse_quotes(root: &Element, p: &mut Parsed) -> Result<(), CorpusError> {
    for el in root.children_named("quote") {
        let id = el
            .attr("id")
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| CorpusError::Parse {
                file: QUOTES_FILE.into(),
                line: el.line,
                message: "quote without id".into(),
            })?
            .to_string();
        let emotions = parse_emotions(el.child("emotions"), "e", QUOTES_FILE, &id, &mut p.violations);
        let quote = Quote {
            id: id.clone(),
            text: el.child_text("text").unwrap_or("").trim().to_string(),
            emotions,
        };
        if p.corpus.quotes.insert(id.clone(), quote).is_some() {
            p.violations.push(Violation {
                file: QUOTES_FILE,
                item: Some(id),
                message: "duplicate quote id".into(),
            });
        }
    }
    Ok(())
}

fn parse_cards(root: &Element, p: &mut Parsed) {
    for el in root.children_named("emotion") {
        let name = el.attr("id").unwrap_or("");
        let emotion = match name.parse::<Emotion>() {
            Ok(e) => e,
            Err(err) => {
                p.violations.push(Violation {
                    file: CARDS_FILE,
                    item: Some(name.to_string()),
                    message: err.to_string(),
                });
                continue;
            }
        };
        let list = |parent: &str, tag: &str| -> Vec<String> {
            el.child(parent)
                .into_iter()
                .flat_map(|p| p.children_named(tag))
                .map(|t| t.text.trim().to_string())
                .filter(|t| !t.is_empty())
                .collect()
        };
        let card = EmotionCard {
            emotion,
            definition: el.child_text("definition").unwrap_or("").trim().to_string(),
            related_terms: list("related", "term"),
            video_urls: list("videos", "url"),
        };
        if p.corpus.cards.insert(emotion, card).is_some() {
            p.violations.push(Violation {
                file: CARDS_FILE,
                item: Some(emotion.id().into()),
                message: "duplicate emotion card".into(),
            });
        }
    }
}

impl Corpus {
    /// Loads and validates a corpus directory. Every invariant violation is
    /// reported at once in [`CorpusError::Invalid`].
    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let themes_path = dir.join(THEMES_FILE);
        let themes = if themes_path.exists() {
            ThemeRegistry::parse(&read(&themes_path)?).ok_or_else(|| {
                CorpusError::Invalid(vec![Violation {
                    file: THEMES_FILE,
                    item: None,
                    message: "theme registry is empty".into(),
                }])
            })?
        } else {
            ThemeRegistry::default()
        };
        let mut parsed = Parsed {
            corpus: Corpus {
                themes: themes.clone(),
                ..Default::default()
            },
            violations: Vec::new(),
        };
        let tales = parse_file(TALES_FILE, &read(&dir.join(TALES_FILE))?, "tales")?;
        parse_tales(&tales, &themes, &mut parsed)?;
        let quotes = parse_file(QUOTES_FILE, &read(&dir.join(QUOTES_FILE))?, "quotes")?;
        parse_quotes(&quotes, &mut parsed)?;
        let cards = parse_file(CARDS_FILE, &read(&dir.join(CARDS_FILE))?, "emotions")?;
        parse_cards(&cards, &mut parsed);

        let mut violations = parsed.violations;
        violations.extend(parsed.corpus.validate());
        if violations.is_empty() {
            Ok(parsed.corpus)
        } else {
            Err(CorpusError::Invalid(violations))
        }
    }

    /// Checks every type invariant; empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut v = |file, item: &str, message: &str| {
            out.push(Violation {
                file,
                item: Some(item.to_string()),
                message: message.to_string(),
            })
        };
        for tale in self.tales.values() {
            if tale.title.trim().is_empty() {
                v(TALES_FILE, &tale.id, "title must be non-empty");
            }
            if tale.body.trim().is_empty() {
                v(TALES_FILE, &tale.id, "body must be non-empty");
            }
            if tale.is_approved() && tale.emotions.is_empty() {
                v(TALES_FILE, &tale.id, "approved tale must have at least one emotion");
            }
            if tale.is_approved() && tale.themes.is_empty() {
                v(TALES_FILE, &tale.id, "approved tale must have at least one theme");
            }
            if tale.min_age.is_some_and(|a| a > MAX_AGE) {
                v(TALES_FILE, &tale.id, "min_age must be within 0..=120");
            }
            for theme in &tale.themes {
                if !self.themes.contains(theme) {
                    v(TALES_FILE, &tale.id, &format!("theme '{theme}' is not in the registry"));
                }
            }
        }
        for quote in self.quotes.values() {
            if quote.text.trim().is_empty() {
                v(QUOTES_FILE, &quote.id, "text must be non-empty");
            }
            if quote.emotions.is_empty() {
                v(QUOTES_FILE, &quote.id, "quote must have at least one emotion");
            }
        }
        for card in self.cards.values() {
            if card.definition.trim().is_empty() {
                v(CARDS_FILE, card.emotion.id(), "definition must be non-empty");
            }
            if card.related_terms.is_empty() {
                v(CARDS_FILE, card.emotion.id(), "related terms must be non-empty");
            }
        }
        for emotion in Emotion::ALL {
            if !self.cards.contains_key(&emotion) {
                v(CARDS_FILE, emotion.id(), "missing emotion card");
            }
        }
        out
    }

    pub fn status_counts(&self) -> StatusCounts {
        let mut c = StatusCounts::default();
        for t in self.tales.values() {
            match t.status {
                TaleStatus::Approved => c.approved += 1,
                TaleStatus::Pending => c.pending += 1,
                TaleStatus::Rejected => c.rejected += 1,
            }
        }
        c
    }

    pub fn approved_tales(&self) -> impl Iterator<Item = &Tale> {
        self.tales.values().filter(|t| t.is_approved())
    }

    pub fn tale(&self, id: &str) -> Option<&Tale> {
        self.tales.get(id)
    }

    pub fn card(&self, emotion: Emotion) -> Option<&EmotionCard> {
        self.cards.get(&emotion)
    }

    fn next_submission_id(&self) -> String {
        (1..)
            .map(|n| format!("sub-{n:04}"))
            .find(|id| !self.tales.contains_key(id))
            .expect("unbounded id space")
    }

    /// Stores an untagged draft as a pending tale and returns its id.
    pub fn submit_tale(&mut self, draft: TaleDraft, submitted_by: Option<&str>) -> Result<String, CorpusError> {
        let title = draft.title.trim();
        let body = draft.body.trim();
        if title.is_empty() {
            return Err(CorpusError::EmptyField("title"));
        }
        if body.is_empty() {
            return Err(CorpusError::EmptyField("body"));
        }
        if let Some(age) = draft.min_age.filter(|a| *a > MAX_AGE) {
            return Err(CorpusError::BadAge(age));
        }
        let id = self.next_submission_id();
        self.tales.insert(
            id.clone(),
            Tale {
                id: id.clone(),
                title: title.to_string(),
                body: body.to_string(),
                emotions: BTreeSet::new(),
                themes: BTreeSet::new(),
                source_url: draft.source_url.filter(|s| !s.trim().is_empty()),
                min_age: draft.min_age,
                status: TaleStatus::Pending,
                submitted_by: submitted_by.map(String::from),
            },
        );
        Ok(id)
    }

    /// Moves a pending tale to approved (with tags) or rejected.
    pub fn review_tale(&mut self, id: &str, decision: ReviewDecision) -> Result<&Tale, CorpusError> {
        let tale = self
            .tales
            .get(id)
            .ok_or_else(|| CorpusError::UnknownTale(id.to_string()))?;
        if tale.status != TaleStatus::Pending {
            return Err(CorpusError::NotPending {
                id: id.to_string(),
                status: tale.status,
            });
        }
        if let ReviewDecision::Approve { emotions, themes } = &decision {
            if emotions.is_empty() || themes.is_empty() {
                return Err(CorpusError::MissingTags(id.to_string()));
            }
            if let Some(t) = themes.iter().find(|t| !self.themes.contains(t)) {
                return Err(CorpusError::UnknownTheme(t.to_string()));
            }
        }
        let tale = self.tales.get_mut(id).expect("checked above");
        match decision {
            ReviewDecision::Approve { emotions, themes } => {
                tale.emotions = emotions;
                tale.themes = themes;
                tale.status = TaleStatus::Approved;
            }
            ReviewDecision::Reject => tale.status = TaleStatus::Rejected,
        }
        Ok(tale)
    }

    pub fn tales_xml(&self) -> String {
        tales_to_xml(self.tales.values())
    }

    pub fn quotes_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<quotes>\n");
        for q in self.quotes.values() {
            out.push_str(&format!("  <quote id=\"{}\">\n", escape_attr(&q.id)));
            out.push_str(&format!("    <text>{}</text>\n", escape_text(&q.text)));
            out.push_str(&format!("    <emotions>{}</emotions>\n", emotion_list(&q.emotions)));
            out.push_str("  </quote>\n");
        }
        out.push_str("</quotes>\n");
        out
    }

    pub fn cards_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<emotions>\n");
        for card in self.cards.values() {
            out.push_str(&format!("  <emotion id=\"{}\">\n", card.emotion.id()));
            out.push_str(&format!("    <definition>{}</definition>\n", escape_text(&card.definition)));
            let terms: String = card
                .related_terms
                .iter()
                .map(|t| format!("<term>{}</term>", escape_text(t)))
                .collect();
            out.push_str(&format!("    <related>{terms}</related>\n"));
            let urls: String = card
                .video_urls
                .iter()
                .map(|u| format!("<url>{}</url>", escape_text(u)))
                .collect();
            out.push_str(&format!("    <videos>{urls}</videos>\n"));
            out.push_str("  </emotion>\n");
        }
        out.push_str("</emotions>\n");
        out
    }

    /// Writes the four corpus files into `dir`. Output is deterministic and
    /// reloads to an equal corpus.
    pub fn export(&self, dir: &Path) -> Result<(), CorpusError> {
        let io = |path: PathBuf| move |source| CorpusError::Io { path, source };
        fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
        for (name, content) in [
            (TALES_FILE, self.tales_xml()),
            (QUOTES_FILE, self.quotes_xml()),
            (CARDS_FILE, self.cards_xml()),
            (THEMES_FILE, self.themes.to_text()),
        ] {
            let path = dir.join(name);
            fs::write(&path, content).map_err(io(path.clone()))?;
        }
        Ok(())
    }

    /// Parses a standalone `tales.xml` document against this corpus' registries.
    pub fn parse_tales_document(&self, src: &str) -> Result<Vec<Tale>, CorpusError> {
        let root = parse_file(TALES_FILE, src, "tales")?;
        let mut parsed = Parsed {
            corpus: Corpus {
                themes: self.themes.clone(),
                ..Default::default()
            },
            violations: Vec::new(),
        };
        parse_tales(&root, &self.themes, &mut parsed)?;
        if !parsed.violations.is_empty() {
            return Err(CorpusError::Invalid(parsed.violations));
        }
        Ok(parsed.corpus.tales.into_values().collect())
    }
}

fn emotion_list(emotions: &BTreeSet<Emotion>) -> String {
    emotions.iter().map(|e| format!("<e>{}</e>", e.id())).collect()
}

/// Serializes tales in the `tales.xml` layout.
pub fn tales_to_xml<'a>(tales: impl IntoIterator<Item = &'a Tale>) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<tales>\n");
    for t in tales {
        out.push_str(&format!("  <tale id=\"{}\" status=\"{}\"", escape_attr(&t.id), t.status));
        if let Some(age) = t.min_age {
            out.push_str(&format!(" min_age=\"{age}\""));
        }
        if let Some(by) = &t.submitted_by {
            out.push_str(&format!(" submitted_by=\"{}\"", escape_attr(by)));
        }
        out.push_str(">\n");
        out.push_str(&format!("    <title>{}</title>\n", escape_text(&t.title)));
        out.push_str(&format!("    <body>{}</body>\n", escape_text(&t.body)));
        out.push_str(&format!("    <emotions>{}</emotions>\n", emotion_list(&t.emotions)));
        let themes: String = t.themes.iter().map(|th| format!("<t>{th}</t>")).collect();
        out.push_str(&format!("    <themes>{themes}</themes>\n"));
        if let Some(url) = &t.source_url {
            out.push_str(&format!("    <source_url>{}</source_url>\n", escape_text(url)));
        }
        out.push_str("  </tale>\n");
    }
    out.push_str("</tales>\n");
    out
}
