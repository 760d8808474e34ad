//! Training material: lexicon directories and held-out splits.
//!
//! A lexicon directory holds one `<class>.txt` per class. Lines are either
//! list items (one document per line) or prose (one document per
//! blank-line-separated paragraph). A `[section]` header switches the source:
//!
//! ```text
//! # comment
//! [terms]          list: terms linked to the class (default before any header)
//! [synonyms]       list
//! [manual]         list: hand-written example posts
//! [definition]     prose
//! [encyclopedia]   prose
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::ClassifyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    TermLexicon,
    Encyclopedia,
    Definition,
    Synonym,
    Manual,
}

impl Source {
    fn from_header(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "terms" | "term_lexicon" => Some(Source::TermLexicon),
            "encyclopedia" => Some(Source::Encyclopedia),
            "definition" | "definitions" => Some(Source::Definition),
            "synonyms" | "synonym" => Some(Source::Synonym),
            "manual" => Some(Source::Manual),
            _ => None,
        }
    }

    fn is_prose(self) -> bool {
        matches!(self, Source::Encyclopedia | Source::Definition)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabeledDoc {
    pub text: String,
    pub label: String,
    pub source: Source,
}

/// Parses one lexicon file into documents labelled `label`.
pub fn parse_lexicon(label: &str, content: &str) -> Result<Vec<LabeledDoc>, ClassifyError> {
    let mut docs = Vec::new();
    let mut source = Source::TermLexicon;
    let mut paragraph: Vec<&str> = Vec::new();

    let flush = |paragraph: &mut Vec<&str>, source: Source, docs: &mut Vec<LabeledDoc>| {
        if !paragraph.is_empty() {
            docs.push(LabeledDoc {
                text: paragraph.join(" "),
                label: label.to_string(),
                source,
            });
            paragraph.clear();
        }
    };

    for (n, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            flush(&mut paragraph, source, &mut docs);
            source = Source::from_header(header).ok_or_else(|| ClassifyError::Lexicon {
                class: label.to_string(),
                line: n + 1,
                message: format!("unknown section [{header}]"),
            })?;
            continue;
        }
        if line.is_empty() {
            flush(&mut paragraph, source, &mut docs);
            continue;
        }
        if source.is_prose() {
            paragraph.push(line);
        } else {
            docs.push(LabeledDoc {
                text: line.to_string(),
                label: label.to_string(),
                source,
            });
        }
    }
    flush(&mut paragraph, source, &mut docs);
    Ok(docs)
}

/// Reads `<class>.txt` for every class of the registry, in registry order.
pub fn build_training_set(classes: &[String], lexicon_dir: &Path) -> Result<Vec<LabeledDoc>, ClassifyError> {
    let mut all = Vec::new();
    for class in classes {
        let path = lexicon_dir.join(format!("{class}.txt"));
        let content = match fs::read_to_string(&path) {
            Ok(c) => c,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ClassifyError::MissingMaterial(class.clone()))
            }
            Err(source) => {
                return Err(ClassifyError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        let docs = parse_lexicon(class, &content)?;
        if docs.is_empty() {
            return Err(ClassifyError::MissingMaterial(class.clone()));
        }
        all.extend(docs);
    }
    Ok(all)
}

/// Stratified split: per class, a seeded shuffle then `holdout` of the
/// documents (at least one when the class has two or more) go to the test side.
pub fn stratified_split(docs: &[LabeledDoc], holdout: f64, seed: u64) -> (Vec<LabeledDoc>, Vec<LabeledDoc>) {
    let mut by_class: BTreeMap<&str, Vec<&LabeledDoc>> = BTreeMap::new();
    for d in docs {
        by_class.entry(d.label.as_str()).or_default().push(d);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (_, mut group) in by_class {
        group.shuffle(&mut rng);
        let k = if group.len() < 2 {
            0
        } else {
            ((group.len() as f64 * holdout).round() as usize).clamp(1, group.len() - 1)
        };
        test.extend(group[..k].iter().map(|d| (*d).clone()));
        train.extend(group[k..].iter().map(|d| (*d).clone()));
    }
    (train, test)
}
