//! Tokenization and normalization shared by retrieval and classification.
//!
//! Tokens are maximal runs of Unicode letters or digits. Normalization
//! lowercases, decomposes to NFKD and drops combining marks, so `Frustración`
//! and `frustracion` compare equal.

use std::collections::BTreeSet;
use std::fs;
use std::ops::Range;
use std::path::Path;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error("cannot normalize an empty term")]
    EmptyTerm,
    #[error("failed to read stopword file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub normalized: String,
    /// Byte range of `surface` inside the tokenized text.
    pub span: Range<usize>,
}

fn strip_marks(s: impl Iterator<Item = char>) -> impl Iterator<Item = char> {
    s.nfkd().filter(|c| !is_combining_mark(*c))
}

fn fold(term: &str) -> String {
    // Lowercasing can reintroduce marks (U+0130 -> i + dot), hence two passes.
    let lowered = strip_marks(term.chars()).flat_map(char::to_lowercase);
    strip_marks(lowered).collect()
}

/// Lowercase + diacritic folding. Idempotent.
pub fn normalize(term: &str) -> Result<String, TextError> {
    if term.is_empty() {
        return Err(TextError::EmptyTerm);
    }
    let folded = fold(term);
    if folded.is_empty() {
        return Err(TextError::EmptyTerm);
    }
    Ok(folded)
}

/// Combining marks count as word characters so decomposed input
/// ("n" + U+0303) stays one token.
fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

/// Splits on non-letter/non-digit boundaries. Runs that fold to nothing
/// (e.g. a lone combining mark classed as alphabetic) are dropped.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    let push = |s: usize, e: usize, tokens: &mut Vec<Token>| {
        let surface = &text[s..e];
        let normalized = fold(surface);
        if !normalized.is_empty() {
            tokens.push(Token {
                surface: surface.to_string(),
                normalized,
                span: s..e,
            });
        }
    };
    for (i, c) in text.char_indices() {
        match (is_word_char(c), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                push(s, i, &mut tokens);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        push(s, text.len(), &mut tokens);
    }
    tokens
}

/// Normalized token strings, in order.
pub fn terms(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.normalized).collect()
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '»' | '”' | '’')
}

/// Byte ranges of each sentence, trimmed of surrounding whitespace.
///
/// Everything outside the returned ranges is whitespace, so the input is
/// recovered by interleaving the gaps with the sentences.
pub fn sentence_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut chars = text.char_indices().peekable();
    let mut start: Option<usize> = None;
    while let Some((i, c)) = chars.next() {
        if start.is_none() {
            if c.is_whitespace() {
                continue;
            }
            start = Some(i);
        }
        if is_terminator(c) {
            let mut end = i + c.len_utf8();
            while let Some(&(j, n)) = chars.peek() {
                if is_terminator(n) || is_closer(n) {
                    end = j + n.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            // A terminator glued to the next word ("3.5", "e.g.x") does not end the sentence.
            match chars.peek() {
                Some(&(_, n)) if !n.is_whitespace() => continue,
                _ => {}
            }
            spans.push(start.take().unwrap_or(i)..end);
        }
    }
    if let Some(s) = start {
        let end = text.trim_end().len();
        if end > s {
            spans.push(s..end);
        }
    }
    spans
}

pub fn split_sentences(text: &str) -> Vec<&str> {
    sentence_spans(text)
        .into_iter()
        .map(|r| &text[r])
        .collect()
}

/// A set of normalized words removed before indexing or querying.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopwordList {
    words: BTreeSet<String>,
}

impl StopwordList {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Parses `stopwords.txt` content: one word per line, `#` starts a comment.
    pub fn parse(content: &str) -> Self {
        let words = content
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .flat_map(terms)
            .collect();
        Self { words }
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let content = fs::read_to_string(path).map_err(|source| TextError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::parse(&content))
    }

    pub fn contains(&self, normalized: &str) -> bool {
        self.words.contains(normalized)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Normalized terms of `text` with stopwords removed.
    pub fn filter_terms(&self, text: &str) -> Vec<String> {
        terms(text)
            .into_iter()
            .filter(|t| !self.contains(t))
            .collect()
    }
}
