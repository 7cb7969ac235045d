//! Shared data model: samples, corpora, and per-model prediction runs.
//!
//! Everything here is validated at construction and immutable afterwards, so
//! a `Corpus` or `ModelRun` can be shared freely across worker threads.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into a corpus label vocabulary.
pub type LabelId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Test,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Partition::Train => f.write_str("train"),
            Partition::Test => f.write_str("test"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub text: String,
    pub gold_label: LabelId,
    pub partition: Partition,
    pub vector: Option<Vec<f64>>,
}

impl Sample {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        gold_label: LabelId,
        partition: Partition,
    ) -> Self {
        Sample {
            id: id.into(),
            text: text.into(),
            gold_label,
            partition,
            vector: None,
        }
    }

    pub fn with_vector(mut self, vector: Vec<f64>) -> Self {
        self.vector = Some(vector);
        self
    }
}

/// Position of `label` in `vocab`.
///
/// ```
/// use eqlboard::model::label_index;
/// let vocab = vec!["neg".to_string(), "pos".to_string()];
/// assert_eq!(label_index(&vocab, "pos").unwrap(), 1);
/// assert!(label_index(&vocab, "neutral").is_err());
/// ```
pub fn label_index(vocab: &[String], label: &str) -> Result<LabelId> {
    vocab
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    name: String,
    label_vocab: Vec<String>,
    samples: Vec<Sample>,
    dim: Option<usize>,
    index: HashMap<String, usize>,
}

impl Corpus {
    /// Validates ids, labels, and vector dimensions.
    pub fn new(
        name: impl Into<String>,
        label_vocab: Vec<String>,
        samples: Vec<Sample>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if label_vocab.is_empty() {
            return Err(Error::config("label vocabulary is empty"));
        }
        for (i, label) in label_vocab.iter().enumerate() {
            if label_vocab[..i].contains(label) {
                return Err(Error::DuplicateId(label.clone()));
            }
        }
        let mut index = HashMap::with_capacity(samples.len());
        let mut dim = None;
        for (pos, sample) in samples.iter().enumerate() {
            if index.insert(sample.id.clone(), pos).is_some() {
                return Err(Error::DuplicateId(sample.id.clone()));
            }
            if sample.gold_label >= label_vocab.len() {
                return Err(Error::UnknownLabel(sample.gold_label.to_string()));
            }
            if let Some(v) = &sample.vector {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFiniteInput);
                }
                match dim {
                    None => dim = Some(v.len()),
                    Some(d) if d != v.len() => {
                        return Err(Error::DimMismatch {
                            expected: d,
                            got: v.len(),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(Corpus {
            name: name.into(),
            label_vocab,
            samples,
            dim,
            index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn label_vocab(&self) -> &[String] {
        &self.label_vocab
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Shared dimension of inline vectors, if any sample carries one.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.index.get(id).map(|&i| &self.samples[i])
    }

    pub fn train(&self) -> impl Iterator<Item = &Sample> {
        self.samples
            .iter()
            .filter(|s| s.partition == Partition::Train)
    }

    pub fn test(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(|s| s.partition == Partition::Test)
    }

    pub fn train_len(&self) -> usize {
        self.train().count()
    }

    pub fn test_len(&self) -> usize {
        self.test().count()
    }

    /// Test sample ids in ascending order.
    pub fn test_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.test().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        ids
    }

    pub fn gold(&self, id: &str) -> Option<LabelId> {
        self.get(id).map(|s| s.gold_label)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub predicted_label: LabelId,
    /// Maximum softmax probability, treated as an opaque scalar in [0, 1].
    pub confidence: f64,
}

/// One model's predictions over the whole test partition.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelRun {
    model_id: String,
    records: BTreeMap<String, PredictionRecord>,
}

impl ModelRun {
    /// Cross-links `records` against `corpus`: every record must point at a
    /// test sample and every test sample must have exactly one record.
    pub fn new(
        model_id: impl Into<String>,
        records: Vec<PredictionRecord>,
        corpus: &Corpus,
    ) -> Result<Self> {
        let model_id = model_id.into();
        let mut map = BTreeMap::new();
        for record in records {
            if !(0.0..=1.0).contains(&record.confidence) {
                return Err(Error::RangeError {
                    what: format!("confidence of {}/{}", model_id, record.sample_id),
                    value: record.confidence,
                });
            }
            match corpus.get(&record.sample_id) {
                Some(s) if s.partition == Partition::Test => {}
                _ => {
                    return Err(Error::DanglingReference {
                        reference: record.sample_id,
                    })
                }
            }
            if record.predicted_label >= corpus.label_vocab().len() {
                return Err(Error::UnknownLabel(record.predicted_label.to_string()));
            }
            if map.contains_key(&record.sample_id) {
                return Err(Error::DuplicateId(record.sample_id));
            }
            map.insert(record.sample_id.clone(), record);
        }
        if let Some(missing) = corpus.test_ids().into_iter().find(|id| !map.contains_key(*id)) {
            return Err(Error::MissingPrediction {
                model: model_id,
                sample_id: missing.to_string(),
            });
        }
        Ok(ModelRun {
            model_id,
            records: map,
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn records(&self) -> &BTreeMap<String, PredictionRecord> {
        &self.records
    }

    pub fn get(&self, sample_id: &str) -> Option<&PredictionRecord> {
        self.records.get(sample_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Whether the prediction for `sample_id` matches its gold label.
    pub fn is_correct(&self, corpus: &Corpus, sample_id: &str) -> Result<bool> {
        let record = self.get(sample_id).ok_or_else(|| Error::MissingPrediction {
            model: self.model_id.clone(),
            sample_id: sample_id.to_string(),
        })?;
        let gold = corpus
            .gold(sample_id)
            .ok_or_else(|| Error::DanglingReference {
                reference: sample_id.to_string(),
            })?;
        Ok(record.predicted_label == gold)
    }
}

/// Fraction of test samples predicted correctly.
pub fn accuracy(run: &ModelRun, corpus: &Corpus) -> Result<f64> {
    let mut total = 0usize;
    let mut correct = 0usize;
    for sample in corpus.test() {
        total += 1;
        if run.is_correct(corpus, &sample.id)? {
            correct += 1;
        }
    }
    if total == 0 {
        return Err(Error::config("corpus has no test samples"));
    }
    Ok(correct as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vec<String> {
        vec!["neg".into(), "pos".into()]
    }

    fn corpus() -> Corpus {
        let samples = vec![
            Sample::new("tr1", "good", 1, Partition::Train),
            Sample::new("t1", "fine", 1, Partition::Test),
            Sample::new("t2", "bad", 0, Partition::Test),
            Sample::new("t3", "great", 1, Partition::Test),
            Sample::new("t4", "awful", 0, Partition::Test),
        ];
        Corpus::new("toy", vocab(), samples).unwrap()
    }

    fn run(preds: [usize; 4]) -> ModelRun {
        let records = ["t1", "t2", "t3", "t4"]
            .iter()
            .zip(preds)
            .map(|(id, p)| PredictionRecord {
                sample_id: id.to_string(),
                predicted_label: p,
                confidence: 0.9,
            })
            .collect();
        ModelRun::new("m", records, &corpus()).unwrap()
    }

    #[test]
    fn label_lookup() {
        assert_eq!(label_index(&vocab(), "pos").unwrap(), 1);
        assert_eq!(label_index(&vocab(), "neg").unwrap(), 0);
        assert!(matches!(
            label_index(&vocab(), "neutral"),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn accuracy_counts() {
        let c = corpus();
        assert_eq!(accuracy(&run([1, 0, 1, 0]), &c).unwrap(), 1.0);
        assert_eq!(accuracy(&run([0, 1, 0, 1]), &c).unwrap(), 0.0);
        assert_eq!(accuracy(&run([1, 0, 1, 1]), &c).unwrap(), 0.75);
    }

    #[test]
    fn missing_record_rejected() {
        let records = vec![PredictionRecord {
            sample_id: "t1".into(),
            predicted_label: 1,
            confidence: 0.5,
        }];
        let err = ModelRun::new("m", records, &corpus()).unwrap_err();
        assert!(matches!(err, Error::MissingPrediction { .. }));
    }

    #[test]
    fn dangling_and_train_references_rejected() {
        for id in ["nope", "tr1"] {
            let records = vec![PredictionRecord {
                sample_id: id.into(),
                predicted_label: 1,
                confidence: 0.5,
            }];
            let err = ModelRun::new("m", records, &corpus()).unwrap_err();
            assert!(matches!(err, Error::DanglingReference { .. }), "{id}");
        }
    }

    #[test]
    fn confidence_bounds() {
        let records = vec![PredictionRecord {
            sample_id: "t1".into(),
            predicted_label: 1,
            confidence: 1.3,
        }];
        let err = ModelRun::new("m", records, &corpus()).unwrap_err();
        assert!(matches!(err, Error::RangeError { .. }));
    }

    #[test]
    fn duplicate_sample_ids() {
        let samples = vec![
            Sample::new("s1", "a", 0, Partition::Train),
            Sample::new("s1", "b", 1, Partition::Test),
        ];
        assert!(matches!(
            Corpus::new("dup", vocab(), samples),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn vector_dims_must_agree() {
        let samples = vec![
            Sample::new("a", "a", 0, Partition::Train).with_vector(vec![1.0, 2.0]),
            Sample::new("b", "b", 1, Partition::Test).with_vector(vec![1.0]),
        ];
        assert!(matches!(
            Corpus::new("dims", vocab(), samples),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn accuracy_is_order_invariant() {
        let c = corpus();
        let mut samples = c.samples().to_vec();
        samples.reverse();
        let reversed = Corpus::new("toy", vocab(), samples).unwrap();
        let r = run([1, 1, 1, 0]);
        assert_eq!(accuracy(&r, &c).unwrap(), accuracy(&r, &reversed).unwrap());
    }
}
