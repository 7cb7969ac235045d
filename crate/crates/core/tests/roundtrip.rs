mod common;

use common::{random_runs, rng, vector_corpus};
use eqlboard::ingest::{
    load_corpus, load_embeddings, load_predictions, save_corpus, save_embeddings, save_predictions,
    EmbeddingFile, EmbeddingFormat, PredictionFormat,
};

#[test]
fn corpus_jsonl_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = vector_corpus(&mut rng(1), 5, 8, 3, 0.1);
    let a = dir.path().join("a.jsonl");
    save_corpus(&corpus, &a).unwrap();
    let loaded = load_corpus(&a).unwrap();
    assert_eq!(loaded.samples(), corpus.samples());
    assert_eq!(loaded.label_vocab(), corpus.label_vocab());
    let b = dir.path().join("b.jsonl");
    save_corpus(&loaded, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn predictions_round_trip_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(2);
    let corpus = vector_corpus(&mut r, 5, 12, 2, 0.0);
    let runs = random_runs(&mut r, &corpus, 3, 0.0);
    for (name, format) in [("p.jsonl", PredictionFormat::Jsonl), ("p.csv", PredictionFormat::Csv)] {
        let path = dir.path().join(name);
        save_predictions(&runs, &corpus, &path, format).unwrap();
        let loaded = load_predictions(&path, format, &corpus).unwrap();
        assert_eq!(loaded, runs);
        let again = dir.path().join(format!("again-{name}"));
        save_predictions(&loaded, &corpus, &again, format).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }
}

#[test]
fn embeddings_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = vector_corpus(&mut rng(3), 6, 6, 5, 0.0);
    let emb = EmbeddingFile::from_corpus(&corpus).unwrap();

    let jsonl = dir.path().join("e.jsonl");
    save_embeddings(&emb, &jsonl, EmbeddingFormat::Jsonl).unwrap();
    assert_eq!(load_embeddings(&jsonl, EmbeddingFormat::Jsonl).unwrap(), emb);

    // The binary format stores f32: the first load rounds, after that it is stable.
    let bin = dir.path().join("e.bin");
    save_embeddings(&emb, &bin, EmbeddingFormat::Bin).unwrap();
    let first = load_embeddings(&bin, EmbeddingFormat::Bin).unwrap();
    for (id, v) in emb.entries() {
        for (a, b) in v.iter().zip(first.get(id).unwrap()) {
            assert_eq!(*a as f32 as f64, *b);
        }
    }
    let bin2 = dir.path().join("e2.bin");
    save_embeddings(&first, &bin2, EmbeddingFormat::Bin).unwrap();
    assert_eq!(load_embeddings(&bin2, EmbeddingFormat::Bin).unwrap(), first);
    assert_eq!(std::fs::read(&bin).unwrap(), std::fs::read(&bin2).unwrap());
}

#[test]
fn malformed_inputs_report_their_line() {
    let corpus = "{\"id\":\"a\",\"text\":\"x\",\"label\":\"p\",\"partition\":\"test\"}\nnot json\n";
    let err = eqlboard::ingest::parse_corpus(corpus.as_bytes(), "c").unwrap_err();
    match err {
        eqlboard::Error::ParseError { line, .. } => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
}
