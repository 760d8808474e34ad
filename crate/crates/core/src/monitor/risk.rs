//! Phrase-lexicon detection of sensitive situations in user posts.
//!
//! The lexicon file is sectioned text, one phrase per line:
//!
//! ```text
//! # comments start with '#'
//! [suicide_self_harm]
//! tired of living
//! [depression]
//! nothing makes sense
//! [bullying]
//! they laugh at me
//! ```
//!
//! Phrases and posts are compared as normalized whole-word sequences, so
//! matching ignores case, diacritics and punctuation.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::MonitorError;
use crate::textproc::terms;

/// Ordered by increasing severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskCategory {
    Bullying,
    Depression,
    SuicideSelfHarm,
}

impl RiskCategory {
    /// Most severe first.
    pub const BY_SEVERITY: [RiskCategory; 3] = [
        RiskCategory::SuicideSelfHarm,
        RiskCategory::Depression,
        RiskCategory::Bullying,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RiskCategory::SuicideSelfHarm => "suicide_self_harm",
            RiskCategory::Depression => "depression",
            RiskCategory::Bullying => "bullying",
        }
    }
}

impl fmt::Display for RiskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RiskCategory {
    type Err = MonitorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RiskCategory::BY_SEVERITY
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| MonitorError::RiskLexicon(format!("unknown category [{s}]")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskFlag {
    pub category: RiskCategory,
    pub matched_phrase: String,
    pub timestamp: DateTime<Utc>,
    pub acknowledged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiskLexicon {
    /// Normalized phrases per category, each stored as a space-joined term sequence.
    phrases: BTreeMap<RiskCategory, Vec<String>>,
}

fn padded(terms: &[String]) -> String {
    format!(" {} ", terms.join(" "))
}

impl RiskLexicon {
    pub fn parse(content: &str) -> Result<Self, MonitorError> {
        let mut phrases: BTreeMap<RiskCategory, Vec<String>> = BTreeMap::new();
        let mut current: Option<RiskCategory> = None;
        for (n, raw) in content.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(name.parse()?);
                continue;
            }
            let category = current.ok_or_else(|| {
                MonitorError::RiskLexicon(format!("line {}: phrase outside any [category]", n + 1))
            })?;
            let t = terms(line);
            if t.is_empty() {
                continue;
            }
            let phrase = t.join(" ");
            let list = phrases.entry(category).or_default();
            if !list.contains(&phrase) {
                list.push(phrase);
            }
        }
        if phrases.values().all(Vec::is_empty) {
            return Err(MonitorError::RiskLexicon("lexicon contains no phrases".into()));
        }
        Ok(Self { phrases })
    }

    pub fn load(path: &Path) -> Result<Self, MonitorError> {
        let content = fs::read_to_string(path).map_err(|e| MonitorError::io(path, e))?;
        Self::parse(&content)
    }

    pub fn phrases(&self, category: RiskCategory) -> &[String] {
        self.phrases.get(&category).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Highest-severity category with a phrase occurring in `text`, with the
    /// first such phrase in lexicon order.
    pub fn detect(&self, text: &str) -> Option<(RiskCategory, &str)> {
        let haystack = padded(&terms(text));
        RiskCategory::BY_SEVERITY.into_iter().find_map(|category| {
            self.phrases(category)
                .iter()
                .find(|p| haystack.contains(&format!(" {p} ")))
                .map(|p| (category, p.as_str()))
        })
    }

    /// [`detect`](Self::detect) wrapped as an unacknowledged flag raised at `at`.
    pub fn flag(&self, text: &str, at: DateTime<Utc>) -> Option<RiskFlag> {
        self.detect(text).map(|(category, phrase)| RiskFlag {
            category,
            matched_phrase: phrase.to_string(),
            timestamp: at,
            acknowledged: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LEX: &str = "[bullying]\nlaugh at me\n[suicide_self_harm]\ntired of living\nend it all\n[depression]\nnothing matters\n";

    #[test]
    fn severity_order_wins() {
        let lex = RiskLexicon::parse(LEX).unwrap();
        assert_eq!(
            lex.detect("They laugh at me and I'm TIRED of living"),
            Some((RiskCategory::SuicideSelfHarm, "tired of living"))
        );
        assert_eq!(lex.detect("they laugh at me"), Some((RiskCategory::Bullying, "laugh at me")));
        assert_eq!(lex.detect("Nothing matters; whatever."), Some((RiskCategory::Depression, "nothing matters")));
    }

    #[test]
    fn whole_words_only() {
        let lex = RiskLexicon::parse(LEX).unwrap();
        assert_eq!(lex.detect("we will spend it all"), None);
        assert_eq!(lex.detect("the weekend it all went fine"), None);
    }

    #[test]
    fn configuration_errors() {
        assert!(RiskLexicon::parse("# nothing\n[bullying]\n").is_err());
        assert!(RiskLexicon::parse("orphan phrase\n").is_err());
        assert!(RiskLexicon::parse("[weather]\nrain\n").is_err());
    }
}
