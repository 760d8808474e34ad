//! Probabilistic text classification shared by the emotion and intent
//! classifiers, plus training-set construction and evaluation.

mod model;
mod training;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use model::{BayesModel, Classification, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use training::{build_training_set, parse_lexicon, stratified_split, LabeledDoc, Source};

use crate::taxonomy::Emotion;

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("smoothing must be positive and finite (got {0})")]
    BadSmoothing(f64),
    #[error("at least two classes are required (got {0})")]
    TooFewClasses(usize),
    #[error("duplicate class in registry")]
    DuplicateClass,
    #[error("class '{0}' has no training documents")]
    EmptyClass(String),
    #[error("label '{0}' is not in the class registry")]
    UnknownLabel(String),
    #[error("no lexicon material for class '{0}'")]
    MissingMaterial(String),
    #[error("lexicon '{class}' line {line}: {message}")]
    Lexicon {
        class: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model snapshot line {line}: {message}")]
    Snapshot { line: usize, message: String },
    #[error("evaluation set is empty")]
    EmptyEvaluation,
    #[error("threshold must lie in (0, 1) (got {0})")]
    BadThreshold(f64),
}

/// Accuracy and confusion counts; `confusion[actual][predicted]` in class order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub classes: Vec<String>,
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
}

/// Scores `model` on labelled documents by argmax prediction.
pub fn evaluate(model: &BayesModel, docs: &[LabeledDoc]) -> Result<Evaluation, ClassifyError> {
    if docs.is_empty() {
        return Err(ClassifyError::EmptyEvaluation);
    }
    let n = model.classes().len();
    let mut confusion = vec![vec![0usize; n]; n];
    let mut correct = 0;
    for doc in docs {
        let actual = model
            .class_index(&doc.label)
            .ok_or_else(|| ClassifyError::UnknownLabel(doc.label.clone()))?;
        let c = model.classify(&doc.text, 1.0);
        let predicted = model
            .class_index(&c.ranked[0].0)
            .expect("ranked classes come from the model");
        confusion[actual][predicted] += 1;
        if actual == predicted {
            correct += 1;
        }
    }
    Ok(Evaluation {
        classes: model.classes().to_vec(),
        total: docs.len(),
        correct,
        accuracy: correct as f64 / docs.len() as f64,
        confusion,
    })
}

fn check_threshold(t: f64) -> Result<f64, ClassifyError> {
    if t > 0.0 && t < 1.0 {
        Ok(t)
    } else {
        Err(ClassifyError::BadThreshold(t))
    }
}

/// Emotion classification result: the ranked distribution and the salient
/// emotion when one clears the threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmotionReading {
    pub salient: Option<Emotion>,
    pub classification: Classification,
}

/// The 30-class emotion classifier.
#[derive(Debug, Clone)]
pub struct EmotionClassifier {
    model: BayesModel,
    threshold: f64,
}

impl EmotionClassifier {
    pub fn class_registry() -> Vec<String> {
        Emotion::ALL.iter().map(|e| e.id().to_string()).collect()
    }

    /// Salience threshold defaults to 1.5 times the uniform prior.
    pub fn default_threshold() -> f64 {
        1.5 / Emotion::ALL.len() as f64
    }

    pub fn new(model: BayesModel, threshold: Option<f64>) -> Result<Self, ClassifyError> {
        if let Some(c) = model.classes().iter().find(|c| c.parse::<Emotion>().is_err()) {
            return Err(ClassifyError::UnknownLabel(c.clone()));
        }
        let threshold = check_threshold(threshold.unwrap_or_else(Self::default_threshold))?;
        Ok(Self { model, threshold })
    }

    pub fn train(docs: &[LabeledDoc], alpha: f64, threshold: Option<f64>) -> Result<Self, ClassifyError> {
        Self::new(BayesModel::train(&Self::class_registry(), docs, alpha)?, threshold)
    }

    pub fn model(&self) -> &BayesModel {
        &self.model
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn classify(&self, text: &str) -> EmotionReading {
        let classification = self.model.classify(text, self.threshold);
        let salient = classification.salient.as_deref().and_then(|s| s.parse().ok());
        EmotionReading {
            salient,
            classification,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    SearchTales,
    ChatEmotions,
    AddTale,
    Exit,
    NoIntention,
}

impl Intent {
    pub const ALL: [Intent; 5] = [
        Intent::SearchTales,
        Intent::ChatEmotions,
        Intent::AddTale,
        Intent::Exit,
        Intent::NoIntention,
    ];

    /// Classes the intent model is trained on; `no_intention` is the
    /// low-confidence fallback.
    pub const EXPRESSED: [Intent; 4] = [Intent::SearchTales, Intent::ChatEmotions, Intent::AddTale, Intent::Exit];

    pub fn as_str(self) -> &'static str {
        match self {
            Intent::SearchTales => "search_tales",
            Intent::ChatEmotions => "chat_emotions",
            Intent::AddTale => "add_tale",
            Intent::Exit => "exit",
            Intent::NoIntention => "no_intention",
        }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Intent {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Intent::ALL
            .into_iter()
            .find(|i| i.as_str() == s)
            .ok_or_else(|| ClassifyError::UnknownLabel(s.to_string()))
    }
}

/// Routes user posts to one of the five intents.
#[derive(Debug, Clone)]
pub struct IntentClassifier {
    model: BayesModel,
    threshold: f64,
}

impl IntentClassifier {
    pub const DEFAULT_THRESHOLD: f64 = 0.5;

    pub fn class_registry() -> Vec<String> {
        Intent::EXPRESSED.iter().map(|i| i.as_str().to_string()).collect()
    }

    pub fn new(model: BayesModel, threshold: Option<f64>) -> Result<Self, ClassifyError> {
        for c in model.classes() {
            if c.parse::<Intent>()? == Intent::NoIntention {
                return Err(ClassifyError::UnknownLabel(c.clone()));
            }
        }
        let threshold = check_threshold(threshold.unwrap_or(Self::DEFAULT_THRESHOLD))?;
        Ok(Self { model, threshold })
    }

    pub fn train(docs: &[LabeledDoc], alpha: f64, threshold: Option<f64>) -> Result<Self, ClassifyError> {
        Self::new(BayesModel::train(&Self::class_registry(), docs, alpha)?, threshold)
    }

    pub fn model(&self) -> &BayesModel {
        &self.model
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn classify(&self, text: &str) -> (Intent, Classification) {
        let c = self.model.classify(text, self.threshold);
        let intent = c
            .salient
            .as_deref()
            .and_then(|s| s.parse().ok())
            .unwrap_or(Intent::NoIntention);
        (intent, c)
    }

    pub fn classify_intent(&self, text: &str) -> Intent {
        self.classify(text).0
    }
}
