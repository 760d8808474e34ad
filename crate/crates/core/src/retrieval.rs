//! Inverted index with divergence-from-randomness ranking (InL2),
//! hard emotion/theme filters and successive refinement.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::corpus::{Quote, Tale};
use crate::taxonomy::{Emotion, ThemeId, ThemeRegistry};
use crate::textproc::StopwordList;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RetrievalError {
    #[error("document frequency must be at least 1 (got {0})")]
    ZeroDocumentFrequency(u32),
    #[error("document length must be positive")]
    ZeroDocumentLength,
    #[error("document frequency {df} exceeds collection size {n}")]
    FrequencyAboveCollection { df: u32, n: usize },
    #[error("length normalization parameter c must be positive (got {0})")]
    BadNormalization(f64),
}

/// InL2 term weight.
///
/// `tfn = tf * log2(1 + c * avgdl / dl)`, then
/// `w = tfn / (tfn + 1) * log2((N + 1) / (df + 0.5))`.
pub fn dfr_weight(tf: u32, df: u32, dl: u32, n: usize, avgdl: f64, c: f64) -> Result<f64, RetrievalError> {
    if df == 0 {
        return Err(RetrievalError::ZeroDocumentFrequency(df));
    }
    if dl == 0 {
        return Err(RetrievalError::ZeroDocumentLength);
    }
    if df as usize > n {
        return Err(RetrievalError::FrequencyAboveCollection { df, n });
    }
    if c.is_nan() || c <= 0.0 {
        return Err(RetrievalError::BadNormalization(c));
    }
    if tf == 0 {
        return Ok(0.0);
    }
    let tfn = tf as f64 * (1.0 + c * avgdl / dl as f64).log2();
    let idf = ((n as f64 + 1.0) / (df as f64 + 0.5)).log2();
    Ok(tfn / (tfn + 1.0) * idf)
}

/// Text and tags fed to [`TaleIndex::build`].
#[derive(Debug, Clone)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub emotions: BTreeSet<Emotion>,
    pub themes: BTreeSet<ThemeId>,
}

impl From<&Tale> for Document {
    fn from(t: &Tale) -> Self {
        Document {
            id: t.id.clone(),
            text: format!("{}\n{}", t.title, t.body),
            emotions: t.emotions.clone(),
            themes: t.themes.clone(),
        }
    }
}

impl From<&Quote> for Document {
    fn from(q: &Quote) -> Self {
        Document {
            id: q.id.clone(),
            text: q.text.clone(),
            emotions: q.emotions.clone(),
            themes: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Posting {
    pub doc: usize,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct DocEntry {
    id: String,
    len: u32,
    emotions: BTreeSet<Emotion>,
    themes: BTreeSet<ThemeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaleIndex {
    docs: Vec<DocEntry>,
    postings: BTreeMap<String, Vec<Posting>>,
    avgdl: f64,
}

impl TaleIndex {
    /// Indexes documents, sorted by id so the result does not depend on input order.
    pub fn build<I>(docs: I, stopwords: &StopwordList) -> Self
    where
        I: IntoIterator<Item = Document>,
    {
        let mut docs: Vec<Document> = docs.into_iter().collect();
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        docs.dedup_by(|a, b| a.id == b.id);

        let mut entries = Vec::with_capacity(docs.len());
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut total_len = 0u64;
        for (idx, doc) in docs.into_iter().enumerate() {
            let terms = stopwords.filter_terms(&doc.text);
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for t in &terms {
                *counts.entry(t.clone()).or_default() += 1;
            }
            for (term, tf) in counts {
                postings.entry(term).or_default().push(Posting { doc: idx, tf });
            }
            total_len += terms.len() as u64;
            entries.push(DocEntry {
                id: doc.id,
                len: terms.len() as u32,
                emotions: doc.emotions,
                themes: doc.themes,
            });
        }
        let avgdl = if entries.is_empty() {
            0.0
        } else {
            total_len as f64 / entries.len() as f64
        };
        TaleIndex {
            docs: entries,
            postings,
            avgdl,
        }
    }

    pub fn from_tales<'a>(tales: impl IntoIterator<Item = &'a Tale>, stopwords: &StopwordList) -> Self {
        Self::build(tales.into_iter().filter(|t| t.is_approved()).map(Document::from), stopwords)
    }

    pub fn from_quotes<'a>(quotes: impl IntoIterator<Item = &'a Quote>, stopwords: &StopwordList) -> Self {
        Self::build(quotes.into_iter().map(Document::from), stopwords)
    }

    /// Number of documents.
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn df(&self, term: &str) -> u32 {
        self.postings.get(term).map_or(0, |p| p.len() as u32)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    fn position(&self, id: &str) -> Option<usize> {
        self.docs.binary_search_by(|d| d.id.as_str().cmp(id)).ok()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.position(id).is_some()
    }

    pub fn tf(&self, term: &str, id: &str) -> u32 {
        let Some(doc) = self.position(id) else { return 0 };
        self.postings(term)
            .iter()
            .find(|p| p.doc == doc)
            .map_or(0, |p| p.tf)
    }

    pub fn doc_len(&self, id: &str) -> Option<u32> {
        self.position(id).map(|i| self.docs[i].len)
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.docs.iter().map(|d| d.id.as_str())
    }

    /// Ids of documents tagged with `emotion`, ascending.
    pub fn tagged_with(&self, emotion: Emotion) -> Vec<&str> {
        self.docs
            .iter()
            .filter(|d| d.emotions.contains(&emotion))
            .map(|d| d.id.as_str())
            .collect()
    }

    fn passes(&self, doc: &DocEntry, query: &Query) -> bool {
        if let Some(allowed) = &query.restrict_to {
            if !allowed.contains(&doc.id) {
                return false;
            }
        }
        if let Some(f) = &query.emotion_filter {
            if doc.emotions.is_disjoint(f) {
                return false;
            }
        }
        if let Some(f) = &query.theme_filter {
            if doc.themes.is_disjoint(f) {
                return false;
            }
        }
        true
    }

    /// Ranks documents for `query`.
    ///
    /// Filters and `restrict_to` are hard constraints. Without an emotion or
    /// theme filter, only documents matching at least one term are returned;
    /// with one, every passing document is returned (term score may be zero).
    pub fn search(&self, query: &Query, c: f64) -> Result<Vec<SearchResult>, RetrievalError> {
        let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
        for (term, qtf) in &query.terms {
            let postings = self.postings(term);
            let df = postings.len() as u32;
            for p in postings {
                let doc = &self.docs[p.doc];
                if !self.passes(doc, query) {
                    continue;
                }
                let w = dfr_weight(p.tf, df, doc.len, self.docs.len(), self.avgdl, c)?;
                *scores.entry(p.doc).or_default() += *qtf as f64 * w;
            }
        }
        if query.has_tag_filter() {
            for (idx, doc) in self.docs.iter().enumerate() {
                if self.passes(doc, query) {
                    scores.entry(idx).or_default();
                }
            }
        }
        let mut results: Vec<SearchResult> = scores
            .into_iter()
            .map(|(idx, score)| {
                let d = &self.docs[idx];
                SearchResult {
                    id: d.id.clone(),
                    score,
                    emotions: d.emotions.clone(),
                    themes: d.themes.clone(),
                }
            })
            .collect();
        results.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
        Ok(results)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub id: String,
    pub score: f64,
    pub emotions: BTreeSet<Emotion>,
    pub themes: BTreeSet<ThemeId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Query {
    /// Normalized term -> multiplicity in the query.
    pub terms: BTreeMap<String, u32>,
    pub emotion_filter: Option<BTreeSet<Emotion>>,
    pub theme_filter: Option<BTreeSet<ThemeId>>,
    pub restrict_to: Option<BTreeSet<String>>,
}

impl Query {
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut q = Query::default();
        for t in terms {
            *q.terms.entry(t.into()).or_default() += 1;
        }
        q
    }

    pub fn with_emotions(mut self, emotions: impl IntoIterator<Item = Emotion>) -> Self {
        let set: BTreeSet<Emotion> = emotions.into_iter().collect();
        if !set.is_empty() {
            self.emotion_filter.get_or_insert_with(BTreeSet::new).extend(set);
        }
        self
    }

    pub fn with_themes(mut self, themes: impl IntoIterator<Item = ThemeId>) -> Self {
        let set: BTreeSet<ThemeId> = themes.into_iter().collect();
        if !set.is_empty() {
            self.theme_filter.get_or_insert_with(BTreeSet::new).extend(set);
        }
        self
    }

    pub fn has_tag_filter(&self) -> bool {
        self.emotion_filter.is_some() || self.theme_filter.is_some()
    }

    /// A query must carry terms or at least one constraint.
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty() && !self.has_tag_filter() && self.restrict_to.is_none()
    }

    /// Narrows a previous search: `followup` is evaluated only over the
    /// documents of `previous_results`.
    pub fn refine<'a>(previous_results: impl IntoIterator<Item = &'a str>, followup: Query) -> Query {
        Query {
            restrict_to: Some(previous_results.into_iter().map(String::from).collect()),
            ..followup
        }
    }
}

/// Turns free text into a [`Query`]: stopwords are dropped and words naming an
/// emotion or a theme also become the matching filter.
#[derive(Debug, Clone)]
pub struct QueryParser {
    pub stopwords: StopwordList,
    pub themes: ThemeRegistry,
}

impl QueryParser {
    pub fn parse(&self, text: &str) -> Query {
        let terms = self.stopwords.filter_terms(text);
        let mut emotions = BTreeSet::new();
        let mut themes = BTreeSet::new();
        for (i, t) in terms.iter().enumerate() {
            if let Ok(e) = t.parse::<Emotion>() {
                emotions.insert(e);
            }
            if let Some(th) = self.themes.get(t) {
                themes.insert(th.clone());
            }
            // two-word names: "emotional dependency", "mental health"
            if let Some(next) = terms.get(i + 1) {
                let pair = format!("{t}_{next}");
                if let Ok(e) = pair.parse::<Emotion>() {
                    emotions.insert(e);
                }
                if let Some(th) = self.themes.get(&pair) {
                    themes.insert(th.clone());
                }
            }
        }
        Query::from_terms(terms).with_emotions(emotions).with_themes(themes)
    }
}
