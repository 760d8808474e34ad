//! TOML configuration. Relative paths resolve against the config file's
//! directory.
//!
//! ```toml
//! corpus_dir = "corpus"
//! stopwords = "stopwords.txt"        # optional; retrieval stopword list
//! data_dir = "data"
//! listen = "127.0.0.1:8080"
//! supervisor_token = "change-me"
//!
//! [lexicons]
//! emotions = "lexicons/emotions"
//! intents = "lexicons/intents"
//! risk = "risk.toml"
//!
//! [retrieval]
//! c = 1.0
//!
//! [classifier]
//! alpha = 1.0
//! emotion_threshold = 0.05           # optional; defaults to 1.5 / 30
//! intent_threshold = 0.5
//!
//! [generation]
//! enabled = false
//! endpoint = "http://127.0.0.1:9000/generate"
//! timeout_ms = 5000
//!
//! [dialogue]
//! open_questions = ["What are your feelings after reading the tale?"]
//! max_results = 5
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{what} does not exist: {path}")]
    MissingPath { what: &'static str, path: String },
    #[error("{0}")]
    OutOfRange(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconPaths {
    pub emotions: PathBuf,
    pub intents: PathBuf,
    pub risk: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSettings {
    pub c: f64,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        Self { c: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub alpha: f64,
    pub emotion_threshold: Option<f64>,
    pub intent_threshold: f64,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            emotion_threshold: None,
            intent_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSettings {
    pub enabled: bool,
    pub endpoint: String,
    pub timeout_ms: u64,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            enabled: false,
            endpoint: String::new(),
            timeout_ms: 5000,
        }
    }
}

pub const DEFAULT_OPEN_QUESTIONS: [&str; 4] = [
    "What are your feelings after reading the tale?",
    "Who would you recommend this tale to?",
    "Tell me if you would have done the same or something similar",
    "What part of the tale did you like the most?",
];

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DialogueSettings {
    /// Pre-designed open questions asked after every tale.
    pub open_questions: Vec<String>,
    /// Results listed per search or recommendation reply.
    pub max_results: usize,
}

impl Default for DialogueSettings {
    fn default() -> Self {
        Self {
            open_questions: DEFAULT_OPEN_QUESTIONS.iter().map(|q| q.to_string()).collect(),
            max_results: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub corpus_dir: PathBuf,
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    pub data_dir: PathBuf,
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default)]
    pub supervisor_token: Option<String>,
    pub lexicons: LexiconPaths,
    #[serde(default)]
    pub retrieval: RetrievalSettings,
    #[serde(default)]
    pub classifier: ClassifierSettings,
    #[serde(default)]
    pub generation: GenerationSettings,
    #[serde(default)]
    pub dialogue: DialogueSettings,
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

impl Config {
    /// Parses TOML, resolving relative paths against `base`.
    pub fn parse(content: &str, base: &Path, origin: &str) -> Result<Self, ConfigError> {
        let mut cfg: Config = toml::from_str(content).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.corpus_dir);
        resolve(&mut cfg.data_dir);
        if let Some(s) = cfg.stopwords.as_mut() {
            resolve(s);
        }
        resolve(&mut cfg.lexicons.emotions);
        resolve(&mut cfg.lexicons.intents);
        resolve(&mut cfg.lexicons.risk);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let content = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&content, base, &path.display().to_string())
    }

    /// Checks numeric ranges and that every input path exists. The data
    /// directory is created on demand and need not exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let exists = |what: &'static str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(ConfigError::MissingPath {
                    what,
                    path: p.display().to_string(),
                })
            }
        };
        exists("corpus directory", &self.corpus_dir)?;
        if let Some(s) = &self.stopwords {
            exists("stopword list", s)?;
        }
        exists("emotion lexicon directory", &self.lexicons.emotions)?;
        exists("intent lexicon directory", &self.lexicons.intents)?;
        exists("risk lexicon", &self.lexicons.risk)?;

        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        if !(self.retrieval.c > 0.0 && self.retrieval.c.is_finite()) {
            return Err(ConfigError::OutOfRange(format!("retrieval.c must be > 0, got {}", self.retrieval.c)));
        }
        if !(self.classifier.alpha > 0.0 && self.classifier.alpha.is_finite()) {
            return Err(ConfigError::OutOfRange(format!(
                "classifier.alpha must be > 0, got {}",
                self.classifier.alpha
            )));
        }
        if let Some(t) = self.classifier.emotion_threshold {
            unit("classifier.emotion_threshold", t)?;
        }
        unit("classifier.intent_threshold", self.classifier.intent_threshold)?;
        if self.dialogue.max_results == 0 {
            return Err(ConfigError::OutOfRange("dialogue.max_results must be >= 1".into()));
        }
        if self.generation.enabled && self.generation.endpoint.trim().is_empty() {
            return Err(ConfigError::OutOfRange("generation.endpoint is required when generation is enabled".into()));
        }
        Ok(())
    }
}
