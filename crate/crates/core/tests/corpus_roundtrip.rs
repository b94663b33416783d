use lexaudit::corpus::{ingest_corpus, RecordFormat};
use lexaudit::synth::{generate, SynthConfig};

#[test]
fn persisted_corpus_reingests_identically() {
    let d = tempfile::tempdir().unwrap();
    let corpus = generate(&SynthConfig::new(200, 5)).corpus;
    let a = d.path().join("a.jsonl");
    let b = d.path().join("b.jsonl");
    corpus.persist(&a).unwrap();
    let back = ingest_corpus(&a, RecordFormat::Jsonl).unwrap();
    assert_eq!(back, corpus);
    back.persist(&b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn fixture_corpus_is_valid() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/tweets.jsonl");
    let c = ingest_corpus(&path, RecordFormat::Jsonl).unwrap();
    assert_eq!(c.len(), 60);
    assert_eq!(c.count(lexaudit::corpus::Label::Positive), 24);
}
