//! Questions asked after a tale is read: one closed question about the
//! tale's emotions, the configured open questions, and "Who …?" questions
//! built from sentences whose subject is a character's name.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::corpus::Tale;
use crate::taxonomy::join_display;
use crate::textproc::{sentence_spans, tokenize, StopwordList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    ClosedEmotion,
    OpenFixed,
    Entity,
    Generated,
}

/// What the dialogue does with the answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FollowupRule {
    /// A negative answer asks which emotions the user sees instead.
    AskEmotionsIfNegative,
    /// Classify the answer and ask to confirm the salient emotion.
    ConfirmEmotion,
    /// Reflect the answer back (active listening).
    Reflect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Question {
    pub kind: QuestionKind,
    pub text: String,
    pub followup: FollowupRule,
}

pub fn closed_emotion_question(tale: &Tale) -> Question {
    Question {
        kind: QuestionKind::ClosedEmotion,
        text: format!(
            "Do you think that this tale deals with '{}' emotions?",
            join_display(&tale.emotions)
        ),
        followup: FollowupRule::AskEmotionsIfNegative,
    }
}

fn is_name_candidate(surface: &str, normalized: &str, stopwords: &StopwordList) -> bool {
    let mut chars = surface.chars();
    let starts_upper = chars.next().is_some_and(char::is_uppercase);
    starts_upper
        && chars.next().is_some()
        && !surface.chars().all(char::is_uppercase)
        && !stopwords.contains(normalized)
}

/// Person names: capitalized words seen somewhere other than the start of a
/// sentence, excluding stopwords, single letters and all-caps words.
pub fn detect_names(text: &str, stopwords: &StopwordList) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    for span in sentence_spans(text) {
        for token in tokenize(&text[span]).into_iter().skip(1) {
            if is_name_candidate(&token.surface, &token.normalized, stopwords) {
                names.insert(token.surface);
            }
        }
    }
    names
}

const LINKING_WORDS: [&str; 3] = ["and", "or", "nor"];

/// "Who …?" questions for sentences that open with a detected name.
pub fn entity_questions(tale: &Tale, stopwords: &StopwordList) -> Vec<Question> {
    let names = detect_names(&tale.body, stopwords);
    let mut out: Vec<Question> = Vec::new();
    for span in sentence_spans(&tale.body) {
        let sentence = &tale.body[span];
        let tokens = tokenize(sentence);
        let Some(first) = tokens.first() else { continue };
        if first.span.start != 0 || !names.contains(&first.surface) {
            continue;
        }
        if tokens.get(1).is_some_and(|t| LINKING_WORDS.contains(&t.normalized.as_str())) {
            continue;
        }
        let rest = sentence[first.span.end..]
            .trim_start_matches(|c: char| c == ',' || c.is_whitespace())
            .trim_end_matches(|c: char| matches!(c, '.' | '!' | '?' | '…' | '"' | '\'' | '»' | '”' | '’') || c.is_whitespace());
        if rest.is_empty() {
            continue;
        }
        let text = format!("Who {rest}?");
        if out.iter().all(|q| q.text != text) {
            out.push(Question {
                kind: QuestionKind::Entity,
                text,
                followup: FollowupRule::Reflect,
            });
        }
    }
    out
}

/// The full question sequence for a tale: closed emotion question, the
/// open questions in configured order, then entity questions.
pub fn generate_tale_questions(tale: &Tale, open_questions: &[String], stopwords: &StopwordList) -> Vec<Question> {
    let mut out = Vec::new();
    if !tale.emotions.is_empty() {
        out.push(closed_emotion_question(tale));
    }
    out.extend(open_questions.iter().map(|q| Question {
        kind: QuestionKind::OpenFixed,
        text: q.clone(),
        followup: FollowupRule::ConfirmEmotion,
    }));
    out.extend(entity_questions(tale, stopwords));
    out
}

const NEGATIVE_WORDS: [&str; 9] = ["no", "not", "nope", "never", "don", "doesn", "didn", "nothing", "disagree"];

/// Whether an answer to a yes/no question reads as a refusal.
pub fn is_negative(answer: &str) -> bool {
    tokenize(answer)
        .iter()
        .any(|t| NEGATIVE_WORDS.contains(&t.normalized.as_str()))
}
