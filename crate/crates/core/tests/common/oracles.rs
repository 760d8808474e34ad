//! Independent reference implementations the engine is checked against.

use std::collections::{BTreeMap, BTreeSet};

use talechat_core::classify::LabeledDoc;
use talechat_core::textproc::{terms, StopwordList};

/// Scores every document with the InL2 formula written out directly.
/// Returns `(id, score)` for documents sharing a term with the query,
/// best first, ties by id.
pub fn brute_force_inl2(
    docs: &[(String, String)],
    stopwords: &StopwordList,
    query: &[String],
    c: f64,
) -> Vec<(String, f64)> {
    let tokenized: Vec<(String, Vec<String>)> = docs
        .iter()
        .map(|(id, text)| (id.clone(), terms(text).into_iter().filter(|t| !stopwords.contains(t)).collect()))
        .collect();
    let n = tokenized.len() as f64;
    let avgdl = tokenized.iter().map(|(_, t)| t.len() as f64).sum::<f64>() / n;
    let query: Vec<String> = query.iter().filter(|t| !stopwords.contains(t)).cloned().collect();

    let mut out = Vec::new();
    for (id, doc) in &tokenized {
        let mut score = 0.0;
        let mut matched = false;
        for q in &query {
            let tf = doc.iter().filter(|t| *t == q).count() as f64;
            if tf == 0.0 {
                continue;
            }
            matched = true;
            let df = tokenized.iter().filter(|(_, d)| d.contains(q)).count() as f64;
            let dl = doc.len() as f64;
            let tfn = tf * (1.0 + c * avgdl / dl).ln() / 2f64.ln();
            let inf = ((n + 1.0) / (df + 0.5)).ln() / 2f64.ln();
            score += tfn / (tfn + 1.0) * inf;
        }
        if matched {
            out.push((id.clone(), score));
        }
    }
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    out
}

/// Posterior over `classes` by explicit joint probability products:
/// `P(c) * prod_w P(w|c)`, normalized. Unknown words are ignored.
pub fn nb_posterior(classes: &[String], docs: &[LabeledDoc], alpha: f64, text: &str) -> Vec<(String, f64)> {
    let mut vocab = BTreeSet::new();
    let mut counts: BTreeMap<&str, BTreeMap<String, f64>> = BTreeMap::new();
    let mut ndocs: BTreeMap<&str, f64> = BTreeMap::new();
    for d in docs {
        *ndocs.entry(d.label.as_str()).or_default() += 1.0;
        for t in terms(&d.text) {
            vocab.insert(t.clone());
            *counts.entry(d.label.as_str()).or_default().entry(t).or_default() += 1.0;
        }
    }
    let v = vocab.len() as f64;
    let words: Vec<String> = terms(text).into_iter().filter(|t| vocab.contains(t)).collect();
    let joint: Vec<f64> = classes
        .iter()
        .map(|c| {
            let prior = ndocs.get(c.as_str()).copied().unwrap_or(0.0) / docs.len() as f64;
            let cc = counts.get(c.as_str());
            let total: f64 = cc.map(|m| m.values().sum()).unwrap_or(0.0);
            words.iter().fold(prior, |p, w| {
                let k = cc.and_then(|m| m.get(w)).copied().unwrap_or(0.0);
                p * (k + alpha) / (total + alpha * v)
            })
        })
        .collect();
    let z: f64 = joint.iter().sum();
    classes.iter().cloned().zip(joint.iter().map(|j| j / z)).collect()
}

/// All multisets of size `0..=max_len` over `vocab`, as space-joined text.
pub fn all_bags(vocab: &[String], max_len: usize) -> Vec<String> {
    fn rec(vocab: &[String], start: usize, left: usize, cur: &mut Vec<String>, out: &mut Vec<String>) {
        out.push(cur.join(" "));
        if left == 0 {
            return;
        }
        for i in start..vocab.len() {
            cur.push(vocab[i].clone());
            rec(vocab, i, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(vocab, 0, max_len, &mut Vec::new(), &mut out);
    out
}

/// Checks `BayesModel` posteriors against [`nb_posterior`] on every bag of
/// up to `max_len` words, for `instances` seeded random training sets with
/// at most 10 words and 3 classes.
pub fn nb_enumeration_check(instances: usize, max_len: usize, seed: u64) -> Result<usize, String> {
    use rand::{Rng, SeedableRng};
    use talechat_core::classify::{BayesModel, Source};

    const WORDS: [&str; 10] = ["sun", "rain", "cloud", "wind", "snow", "storm", "fog", "heat", "cold", "ice"];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for _ in 0..instances {
        let classes = rng.random_range(2..=3usize);
        let vocab = rng.random_range(1..=10usize);
        let alpha = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.1..3.0) };
        let names: Vec<String> = (0..classes).map(|c| format!("c{c}")).collect();
        let ndocs = rng.random_range(classes..=8);
        let docs: Vec<LabeledDoc> = (0..ndocs)
            .map(|i| {
                // the first documents cover every class once
                let label = if i < classes { i } else { rng.random_range(0..classes) };
                let len = rng.random_range(1..=5usize);
                LabeledDoc {
                    text: (0..len).map(|_| WORDS[rng.random_range(0..vocab)]).collect::<Vec<_>>().join(" "),
                    label: names[label].clone(),
                    source: Source::Manual,
                }
            })
            .collect();
        let model = BayesModel::train(&names, &docs, alpha).map_err(|e| e.to_string())?;
        let words: Vec<String> = WORDS[..vocab].iter().map(|w| w.to_string()).collect();
        for text in all_bags(&words, max_len) {
            let got = model.classify(&text, 0.5);
            for (class, want) in nb_posterior(&names, &docs, alpha, &text) {
                let have = got.posterior(&class).ok_or("missing class")?;
                if (have - want).abs() > 1e-9 {
                    return Err(format!("{text:?} {class}: {have} vs oracle {want}"));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

pub const DFR_DOCS: [(&str, &str); 5] = [
    ("d1", "The night was long and the insomnia kept her awake, insomnia again."),
    ("d2", "A cake of flour, eggs and sugar; the cake fell and frustration grew."),
    ("d3", "Depression and other mental illnesses are common; talking about mental health helps."),
    ("d4", "Two voices argued inside him: bipolarity, joy and sadness taking turns every night."),
    ("d5", "Friends drink coffee in a bar, and regret turns into compassion."),
];

pub const DFR_QUERIES: [&str; 10] = [
    "insomnia",
    "night",
    "mental illnesses",
    "cake frustration",
    "bipolarity joy",
    "coffee bar regret compassion",
    "the and of",
    "night night insomnia",
    "sadness depression health",
    "unicorn",
];

/// Compares `TaleIndex::search` with [`brute_force_inl2`] for one query.
pub fn dfr_check(docs: &[(String, String)], stopwords: &StopwordList, q: &str, c: f64) -> Result<(), String> {
    use talechat_core::retrieval::{Document, Query, TaleIndex};
    let idx = TaleIndex::build(
        docs.iter().map(|(id, text)| Document {
            id: id.clone(),
            text: text.clone(),
            emotions: Default::default(),
            themes: Default::default(),
        }),
        stopwords,
    );
    let got = idx
        .search(&Query::from_terms(stopwords.filter_terms(q)), c)
        .map_err(|e| e.to_string())?;
    let want = brute_force_inl2(docs, stopwords, &terms(q), c);
    let got_ids: Vec<&str> = got.iter().map(|r| r.id.as_str()).collect();
    let want_ids: Vec<&str> = want.iter().map(|(i, _)| i.as_str()).collect();
    if got_ids != want_ids {
        return Err(format!("{q:?}: ranking {got_ids:?} != {want_ids:?}"));
    }
    for (g, (_, w)) in got.iter().zip(&want) {
        if (g.score - w).abs() > 1e-9 {
            return Err(format!("{q:?}: {} score {} != {}", g.id, g.score, w));
        }
    }
    Ok(())
}
