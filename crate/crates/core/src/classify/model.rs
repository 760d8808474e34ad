//! Multinomial Naive Bayes with Laplace smoothing and its snapshot format.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::training::LabeledDoc;
use super::ClassifyError;
use crate::textproc;

#[derive(Debug, Clone, PartialEq)]
pub struct BayesModel {
    classes: Vec<String>,
    log_prior: Vec<f64>,
    vocab: BTreeMap<String, usize>,
    /// `log_likelihood[class][term]`
    log_likelihood: Vec<Vec<f64>>,
    alpha: f64,
}

/// Posterior distribution over classes, highest first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub ranked: Vec<(String, f64)>,
    pub salient: Option<String>,
}

impl Classification {
    pub fn top(&self) -> Option<(&str, f64)> {
        self.ranked.first().map(|(c, p)| (c.as_str(), *p))
    }

    pub fn posterior(&self, class: &str) -> Option<f64> {
        self.ranked.iter().find(|(c, _)| c == class).map(|(_, p)| *p)
    }
}

impl BayesModel {
    /// Trains over `classes` (the registry, in order). Every class needs at
    /// least one document and every document a registered label.
    pub fn train(classes: &[String], docs: &[LabeledDoc], alpha: f64) -> Result<Self, ClassifyError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ClassifyError::BadSmoothing(alpha));
        }
        if classes.len() < 2 {
            return Err(ClassifyError::TooFewClasses(classes.len()));
        }
        let class_idx: BTreeMap<&str, usize> =
            classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        if class_idx.len() != classes.len() {
            return Err(ClassifyError::DuplicateClass);
        }

        let mut doc_counts = vec![0usize; classes.len()];
        let mut term_counts: Vec<BTreeMap<String, u64>> = vec![BTreeMap::new(); classes.len()];
        let mut vocab: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            let c = *class_idx
                .get(doc.label.as_str())
                .ok_or_else(|| ClassifyError::UnknownLabel(doc.label.clone()))?;
            doc_counts[c] += 1;
            for t in textproc::terms(&doc.text) {
                vocab.entry(t.clone()).or_insert(0);
                *term_counts[c].entry(t).or_default() += 1;
            }
        }
        if let Some(c) = doc_counts.iter().position(|n| *n == 0) {
            return Err(ClassifyError::EmptyClass(classes[c].clone()));
        }
        for (i, v) in vocab.values_mut().enumerate() {
            *v = i;
        }

        let total_docs = docs.len() as f64;
        let log_prior = doc_counts
            .iter()
            .map(|n| (*n as f64 / total_docs).ln())
            .collect();
        let v = vocab.len() as f64;
        let log_likelihood = term_counts
            .iter()
            .map(|counts| {
                let total: u64 = counts.values().sum();
                let denom = total as f64 + alpha * v;
                vocab
                    .keys()
                    .map(|t| ((counts.get(t).copied().unwrap_or(0) as f64 + alpha) / denom).ln())
                    .collect()
            })
            .collect();
        Ok(BayesModel {
            classes: classes.to_vec(),
            log_prior,
            vocab,
            log_likelihood,
            alpha,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn log_prior(&self, class: usize) -> f64 {
        self.log_prior[class]
    }

    /// `ln P(term | class)`, `None` for out-of-vocabulary terms.
    pub fn log_likelihood(&self, class: usize, term: &str) -> Option<f64> {
        self.vocab.get(term).map(|&t| self.log_likelihood[class][t])
    }

    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    /// Unnormalized log joint per class; `known` counts in-vocabulary tokens.
    fn log_joint(&self, text: &str) -> (Vec<f64>, usize) {
        let ids: Vec<usize> = textproc::terms(text)
            .iter()
            .filter_map(|t| self.vocab.get(t).copied())
            .collect();
        let joint = (0..self.classes.len())
            .map(|c| {
                self.log_prior[c] + ids.iter().map(|&t| self.log_likelihood[c][t]).sum::<f64>()
            })
            .collect();
        (joint, ids.len())
    }

    /// Posterior over classes. Unknown tokens are skipped; with no known
    /// token the prior is returned. `salient` is the top class when its
    /// posterior reaches `threshold` and is not tied.
    pub fn classify(&self, text: &str, threshold: f64) -> Classification {
        let (joint, known) = self.log_joint(text);
        let max = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = joint.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = weights.iter().sum();
        let mut ranked: Vec<(usize, f64)> = weights.iter().map(|w| w / z).enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        let salient = match ranked.as_slice() {
            [(c, p), rest @ ..] if known > 0 && *p >= threshold && rest.first().is_none_or(|r| r.1 < *p) => {
                Some(self.classes[*c].clone())
            }
            _ => None,
        };
        Classification {
            ranked: ranked
                .into_iter()
                .map(|(c, p)| (self.classes[c].clone(), p))
                .collect(),
            salient,
        }
    }

    /// Serializes the model in the versioned snapshot format:
    ///
    /// ```text
    /// talechat-nb 1
    /// alpha <f64>
    /// classes <n> <name>...
    /// vocab <size>
    /// prior <ln P(c)>...
    /// term <token> <ln P(token|c)>...     (one line per vocabulary term, sorted)
    /// ```
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION}");
        let _ = writeln!(out, "alpha {:?}", self.alpha);
        let _ = writeln!(out, "classes {} {}", self.classes.len(), self.classes.join(" "));
        let _ = writeln!(out, "vocab {}", self.vocab.len());
        let priors: Vec<String> = self.log_prior.iter().map(|p| format!("{p:?}")).collect();
        let _ = writeln!(out, "prior {}", priors.join(" "));
        for (term, &t) in &self.vocab {
            let row: Vec<String> = self
                .log_likelihood
                .iter()
                .map(|ll| format!("{:?}", ll[t]))
                .collect();
            let _ = writeln!(out, "term {term} {}", row.join(" "));
        }
        out
    }

    pub fn from_snapshot(src: &str) -> Result<Self, ClassifyError> {
        let bad = |line: usize, msg: &str| ClassifyError::Snapshot {
            line,
            message: msg.to_string(),
        };
        let mut lines = src.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |key: &str| -> Result<(usize, Vec<&str>), ClassifyError> {
            let (n, line) = lines.next().ok_or_else(|| bad(0, "unexpected end of snapshot"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(bad(n, &format!("expected '{key}'")));
            }
            Ok((n, parts.collect()))
        };
        let num = |n: usize, s: &str| -> Result<f64, ClassifyError> {
            s.parse::<f64>().map_err(|_| bad(n, &format!("bad number '{s}'")))
        };

        let (n, header) = next(SNAPSHOT_MAGIC)?;
        if header != [SNAPSHOT_VERSION] {
            return Err(bad(n, "unsupported snapshot version"));
        }
        let (n, alpha) = next("alpha")?;
        let alpha = num(n, alpha.first().ok_or_else(|| bad(n, "missing alpha"))?)?;
        let (n, classes) = next("classes")?;
        let count: usize = classes
            .first()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| bad(n, "missing class count"))?;
        let classes: Vec<String> = classes[1..].iter().map(|s| s.to_string()).collect();
        if classes.len() != count || count < 2 {
            return Err(bad(n, "class count mismatch"));
        }
        let (n, vocab_size) = next("vocab")?;
        let vocab_size: usize = vocab_size
            .first()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| bad(n, "missing vocabulary size"))?;
        let (n, prior) = next("prior")?;
        if prior.len() != count {
            return Err(bad(n, "prior row length mismatch"));
        }
        let log_prior = prior.iter().map(|p| num(n, p)).collect::<Result<Vec<_>, _>>()?;

        let mut vocab = BTreeMap::new();
        let mut log_likelihood = vec![Vec::with_capacity(vocab_size); count];
        for t in 0..vocab_size {
            let (n, row) = next("term")?;
            let (term, values) = row.split_first().ok_or_else(|| bad(n, "missing term"))?;
            if values.len() != count {
                return Err(bad(n, "likelihood row length mismatch"));
            }
            if vocab.insert(term.to_string(), t).is_some() {
                return Err(bad(n, "duplicate term"));
            }
            for (c, v) in values.iter().enumerate() {
                log_likelihood[c].push(num(n, v)?);
            }
        }
        if lines.next().is_some_and(|(_, l)| !l.trim().is_empty()) {
            return Err(bad(0, "trailing data after vocabulary"));
        }
        Ok(BayesModel {
            classes,
            log_prior,
            vocab,
            log_likelihood,
            alpha,
        })
    }
}

pub const SNAPSHOT_MAGIC: &str = "talechat-nb";
pub const SNAPSHOT_VERSION: &str = "1";
