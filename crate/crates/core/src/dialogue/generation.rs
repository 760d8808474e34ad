//! Pluggable text generation for active listening and summaries.
//!
//! The service contract is plain text in, plain text out. Every
//! generation-backed operation has a deterministic fallback, used when the
//! client is disabled or the call fails, so a generation outage never
//! surfaces to the user.

use std::collections::VecDeque;
use std::sync::Mutex;

use crate::corpus::Tale;
use crate::textproc::split_sentences;

pub const PARAPHRASE_PROMPT: &str = "Paraphrase the following sentence showing empathy: ";
pub const FEEL_PROMPT: &str = "How do you feel about this sentence: ";
pub const SUMMARY_PROMPT: &str = "Summarize this tale in quotes '";
pub const CONFIRMATION: &str = "Did I understand you correctly?";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("generation service is disabled")]
    Disabled,
    #[error("generation service timed out")]
    Timeout,
    #[error("generation service failed: {0}")]
    Failed(String),
}

pub trait TextGenerator: Send + Sync {
    fn is_enabled(&self) -> bool;
    fn generate(&self, prompt: &str) -> Result<String, GenError>;
}

/// Always disabled: every caller takes its template fallback.
#[derive(Debug, Default, Clone, Copy)]
pub struct DisabledGenerator;

impl TextGenerator for DisabledGenerator {
    fn is_enabled(&self) -> bool {
        false
    }

    fn generate(&self, _prompt: &str) -> Result<String, GenError> {
        Err(GenError::Disabled)
    }
}

/// How a [`RecordingGenerator`] answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StubBehavior {
    /// Returns the prompt unchanged.
    Echo,
    /// Returns the same text for every prompt.
    Fixed(String),
    /// Pops scripted results in order, then fails.
    Scripted(VecDeque<Result<String, GenError>>),
    /// Every call times out.
    Timeout,
}

/// In-process client that records every prompt it receives.
#[derive(Debug)]
pub struct RecordingGenerator {
    behavior: Mutex<StubBehavior>,
    prompts: Mutex<Vec<String>>,
}

impl RecordingGenerator {
    pub fn new(behavior: StubBehavior) -> Self {
        Self {
            behavior: Mutex::new(behavior),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn echo() -> Self {
        Self::new(StubBehavior::Echo)
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("prompts lock").clone()
    }
}

impl TextGenerator for RecordingGenerator {
    fn is_enabled(&self) -> bool {
        true
    }

    fn generate(&self, prompt: &str) -> Result<String, GenError> {
        self.prompts.lock().expect("prompts lock").push(prompt.to_string());
        match &mut *self.behavior.lock().expect("behavior lock") {
            StubBehavior::Echo => Ok(prompt.to_string()),
            StubBehavior::Fixed(s) => Ok(s.clone()),
            StubBehavior::Scripted(q) => q.pop_front().unwrap_or(Err(GenError::Failed("script exhausted".into()))),
            StubBehavior::Timeout => Err(GenError::Timeout),
        }
    }
}

/// The template used when no generated paraphrase is available.
pub fn listening_fallback(answer: &str) -> String {
    format!("You said: '{}'. {CONFIRMATION}", answer.trim())
}

fn as_confirmation(text: &str) -> String {
    let t = text.trim();
    if t.ends_with('?') {
        t.to_string()
    } else {
        format!("{t} {CONFIRMATION}")
    }
}

/// Reflects the user's answer back as an empathetic confirmation question.
/// Tries the paraphrase prompt, then the feeling prompt; the first
/// non-empty response wins.
pub fn active_listen(client: &dyn TextGenerator, answer: &str) -> String {
    if client.is_enabled() {
        for prefix in [PARAPHRASE_PROMPT, FEEL_PROMPT] {
            if let Ok(text) = client.generate(&format!("{prefix}{}", answer.trim())) {
                if !text.trim().is_empty() {
                    return as_confirmation(&text);
                }
            }
        }
    }
    listening_fallback(answer)
}

/// First two sentences of the tale body.
pub fn extractive_summary(tale: &Tale) -> String {
    split_sentences(&tale.body).into_iter().take(2).collect::<Vec<_>>().join(" ")
}

/// Summary of a tale, generated when possible, extractive otherwise.
pub fn summarize_tale(client: &dyn TextGenerator, tale: &Tale) -> String {
    if client.is_enabled() {
        if let Ok(text) = client.generate(&format!("{SUMMARY_PROMPT}{}'", tale.body)) {
            if !text.trim().is_empty() {
                return text.trim().to_string();
            }
        }
    }
    extractive_summary(tale)
}
