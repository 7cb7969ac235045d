//! Chart-ready projections of a leaderboard: parallel coordinates (PCP),
//! the accuracy vs weighted multi-line chart (MLC), split sunbursts and
//! per-sample beeswarms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::leaderboard::{DifficultyInput, LeaderboardView};
use crate::model::{Corpus, ModelRun};

pub const CHART_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcpLine {
    pub model_id: String,
    pub split_scores: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlcPoint {
    pub model_id: String,
    pub accuracy: f64,
    pub weighted: f64,
    pub changed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SunburstArc {
    pub split: usize,
    pub size: usize,
    pub correct: usize,
    pub incorrect: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmPoint {
    pub sample_id: String,
    #[serde(rename = "B")]
    pub b: f64,
    pub split: usize,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartBundle {
    pub chart_schema: u32,
    pub method: String,
    /// Models in leaderboard order.
    pub pcp: Vec<PcpLine>,
    pub mlc: Vec<MlcPoint>,
    pub sunburst: BTreeMap<String, Vec<SunburstArc>>,
    pub beeswarm: BTreeMap<String, Vec<BeeswarmPoint>>,
    /// Seed, input digests and similar context supplied by the caller.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, Value>,
}

/// Projects a view and its inputs into chart data. Every model in the view
/// needs a run, and the view, scores and splits must share one method.
pub fn build_chart_bundle(
    view: &LeaderboardView,
    input: &DifficultyInput,
    runs: &[ModelRun],
    corpus: &Corpus,
) -> Result<ChartBundle> {
    if view.method != input.method_id() {
        return Err(Error::ProvenanceError(format!(
            "view built with {} but scores come from {}",
            view.method,
            input.method_id()
        )));
    }
    let by_id: BTreeMap<&str, &ModelRun> = runs.iter().map(|r| (r.model_id(), r)).collect();
    let mut pcp = Vec::new();
    let mut mlc = Vec::new();
    let mut sunburst = BTreeMap::new();
    let mut beeswarm = BTreeMap::new();
    for row in &view.rows {
        let run = by_id.get(row.model_id.as_str()).ok_or_else(|| {
            Error::ProvenanceError(format!("no predictions for model {}", row.model_id))
        })?;
        let w = input.for_model(&row.model_id)?;
        if w.scores.method.id() != view.method || w.splits.method != w.scores.method.to_string() {
            return Err(Error::ProvenanceError(format!(
                "splits for {} were formed from {}",
                row.model_id, w.splits.method
            )));
        }
        let n = w.splits.n();
        pcp.push(PcpLine {
            model_id: row.model_id.clone(),
            split_scores: row.split_scores.clone(),
        });
        mlc.push(MlcPoint {
            model_id: row.model_id.clone(),
            accuracy: 100.0 * row.accuracy,
            weighted: row.overall,
            changed: view.changed.contains(&row.model_id),
        });
        let mut arcs: Vec<SunburstArc> = (1..=n)
            .map(|split| SunburstArc { split, size: 0, correct: 0, incorrect: 0 })
            .collect();
        let mut points = Vec::with_capacity(w.scores.len());
        for (id, &b) in &w.scores.values {
            let split = w.splits.split_of(id).ok_or_else(|| {
                Error::ProvenanceError(format!("sample {id} has a score but no split"))
            })?;
            let correct = run.is_correct(corpus, id)?;
            let arc = &mut arcs[split - 1];
            arc.size += 1;
            if correct {
                arc.correct += 1;
            } else {
                arc.incorrect += 1;
            }
            points.push(BeeswarmPoint { sample_id: id.clone(), b, split, correct });
        }
        sunburst.insert(row.model_id.clone(), arcs);
        beeswarm.insert(row.model_id.clone(), points);
    }
    Ok(ChartBundle {
        chart_schema: CHART_SCHEMA,
        method: view.method.clone(),
        pcp,
        mlc,
        sunburst,
        beeswarm,
        provenance: BTreeMap::new(),
    })
}

impl ChartBundle {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("serializable bundle");
        s.push('\n');
        s
    }

    /// Content address: the first 16 hex digits of the SHA-256 of [`Self::to_json`].
    pub fn bundle_id(&self) -> String {
        digest_hex(self.to_json().as_bytes())[..16].to_string()
    }
}

/// Lowercase hex SHA-256.
pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
