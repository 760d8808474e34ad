//! Tale recommendation from the emotions detected during a chat.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::corpus::Tale;
use crate::taxonomy::Emotion;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Recommendation {
    pub tale: String,
    /// Sum of the detection counts of the shared emotions.
    pub score: usize,
    pub matched: Vec<Emotion>,
}

/// Ranks approved tales sharing at least one detected emotion, skipping
/// tales already read and tales above the reader's age. Ordered by score
/// descending, then tale id.
pub fn recommend<'a>(
    tales: impl IntoIterator<Item = &'a Tale>,
    detected: &BTreeMap<Emotion, usize>,
    read: &BTreeSet<String>,
    age: Option<u32>,
) -> Vec<Recommendation> {
    let mut out: Vec<Recommendation> = tales
        .into_iter()
        .filter(|t| t.is_approved() && !read.contains(&t.id) && t.suitable_for(age))
        .filter_map(|t| {
            let matched: Vec<Emotion> = t
                .emotions
                .iter()
                .copied()
                .filter(|e| detected.get(e).is_some_and(|c| *c > 0))
                .collect();
            if matched.is_empty() {
                return None;
            }
            Some(Recommendation {
                tale: t.id.clone(),
                score: matched.iter().map(|e| detected[e]).sum(),
                matched,
            })
        })
        .collect();
    out.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.tale.cmp(&b.tale)));
    out
}
