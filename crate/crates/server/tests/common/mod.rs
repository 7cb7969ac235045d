#![allow(dead_code)]

use std::path::Path;

use eqlboard::ingest::{save_corpus, save_predictions, PredictionFormat};
use eqlboard::model::{Corpus, ModelRun, Partition, PredictionRecord, Sample};
use eqlboard::session::Manifest;

/// 24 train and 30 test samples in two noisy clusters, vectors inline.
pub fn corpus() -> Corpus {
    let samples = (0..54)
        .map(|i| {
            let label = i % 2;
            let sign = if label == 1 { 1.0 } else { -1.0 };
            let x = i as f64;
            let v = vec![sign + (x * 1.3).sin(), sign * 0.5 + (x * 0.7).cos(), (x * 2.1).sin()];
            let (id, part) = if i < 24 { (format!("tr{i:02}"), Partition::Train) } else { (format!("t{i:02}"), Partition::Test) };
            Sample::new(id, format!("sentence {i}"), label, part).with_vector(v)
        })
        .collect();
    Corpus::new("fixture", vec!["neg".into(), "pos".into()], samples).unwrap()
}

/// Model `k` gets test sample `i` wrong when `(i + k) % (k + 3) == 0`.
pub fn runs(corpus: &Corpus) -> Vec<ModelRun> {
    (0..3)
        .map(|k| {
            let records = corpus
                .test_ids()
                .iter()
                .enumerate()
                .map(|(i, id)| {
                    let gold = corpus.gold(id).unwrap();
                    let wrong = (i + k) % (k + 3) == 0;
                    PredictionRecord {
                        sample_id: id.to_string(),
                        predicted_label: if wrong { 1 - gold } else { gold },
                        confidence: 0.5 + 0.5 * ((i * 7 + k) % 10) as f64 / 10.0,
                    }
                })
                .collect();
            ModelRun::new(format!("model{k}"), records, corpus).unwrap()
        })
        .collect()
}

pub fn write_fixture(dir: &Path) -> Manifest {
    let c = corpus();
    save_corpus(&c, &dir.join("corpus.jsonl")).unwrap();
    save_predictions(&runs(&c), &c, &dir.join("predictions.csv"), PredictionFormat::Csv).unwrap();
    Manifest {
        corpus: dir.join("corpus.jsonl"),
        predictions: dir.join("predictions.csv"),
        seed: 3,
        ..Manifest::default()
    }
}
