use std::hint::black_box;
use std::path::{Path, PathBuf};

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use talechat_core::config::Config;
use talechat_core::corpus::Corpus;
use talechat_core::dialogue::{train_classifiers, Knowledge};
use talechat_core::retrieval::{Document, TaleIndex};
use talechat_core::textproc::{tokenize, StopwordList};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load() -> (Config, Corpus, StopwordList) {
    let cfg = Config::load(&fixtures().join("config.toml")).unwrap();
    let corpus = Corpus::load(&cfg.corpus_dir).unwrap();
    let stopwords = StopwordList::load(cfg.stopwords.as_ref().unwrap()).unwrap();
    (cfg, corpus, stopwords)
}

/// `copies` renamed copies of every approved fixture tale.
fn scaled_index(corpus: &Corpus, stopwords: &StopwordList, copies: usize) -> TaleIndex {
    let docs = (0..copies).flat_map(|i| {
        corpus.approved_tales().map(move |t| {
            let mut d = Document::from(t);
            d.id = format!("{}-{i:05}", t.id);
            d
        })
    });
    TaleIndex::build(docs, stopwords)
}

fn search(c: &mut Criterion) {
    let (cfg, corpus, stopwords) = load();
    let parser = Knowledge::build(corpus.clone(), &stopwords).parser;
    let query = parser.parse("tales about mental illnesses and bipolarity");
    let mut group = c.benchmark_group("search");
    for copies in [1, 100, 1000] {
        let index = scaled_index(&corpus, &stopwords, copies);
        group.bench_with_input(BenchmarkId::from_parameter(index.len()), &index, |b, index| {
            b.iter(|| index.search(black_box(&query), cfg.retrieval.c).unwrap())
        });
    }
    group.finish();
}

fn classify(c: &mut Criterion) {
    let (cfg, _, _) = load();
    let (emotions, intents) = train_classifiers(&cfg).unwrap();
    c.bench_function("classify/emotion", |b| {
        b.iter(|| emotions.classify(black_box("Tonight I had insomnia and could not stop thinking")))
    });
    c.bench_function("classify/intent", |b| {
        b.iter(|| intents.classify_intent(black_box("I want to search for tales on mental illnesses")))
    });
}

fn tokenize_text(c: &mut Criterion) {
    let (_, corpus, _) = load();
    let text: String = corpus.approved_tales().map(|t| t.body.as_str()).collect::<Vec<_>>().join("\n");
    c.bench_function("tokenize/corpus", |b| b.iter(|| tokenize(black_box(&text))));
}

criterion_group!(benches, search, classify, tokenize_text);
criterion_main!(benches);
