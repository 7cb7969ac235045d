//! Weighted leaderboards and how they differ from the accuracy ranking.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::difficulty::{wmprob_difficulty, DifficultyScore, Method};
use crate::error::{Error, Result};
use crate::ingest::format_f64;
use crate::model::{accuracy, Corpus, ModelRun};
use crate::scoring::{form_splits, weighted_metric, MetricResult, SplitAssignment, SplitConfig, WeightScheme};

/// Scores together with the splits formed from them.
#[derive(Clone, Debug, PartialEq)]
pub struct Weighting {
    pub scores: DifficultyScore,
    pub splits: SplitAssignment,
}

impl Weighting {
    pub fn new(scores: DifficultyScore, config: &SplitConfig) -> Result<Self> {
        let splits = form_splits(&scores, config)?;
        Ok(Weighting { scores, splits })
    }
}

/// Model-independent scores are shared; confidence scores exist per model.
#[derive(Clone, Debug, PartialEq)]
pub enum DifficultyInput {
    Shared(Weighting),
    PerModel(BTreeMap<String, Weighting>),
}

impl DifficultyInput {
    pub fn shared(scores: DifficultyScore, config: &SplitConfig) -> Result<Self> {
        if scores.method.is_model_specific() {
            return Err(Error::config("confidence scores are per model; use DifficultyInput::confidence"));
        }
        Ok(DifficultyInput::Shared(Weighting::new(scores, config)?))
    }

    /// Each model's confidences, split separately.
    pub fn confidence(runs: &[ModelRun], config: &SplitConfig) -> Result<Self> {
        runs.iter()
            .map(|r| Ok((r.model_id().to_string(), Weighting::new(wmprob_difficulty(r), config)?)))
            .collect::<Result<_>>()
            .map(DifficultyInput::PerModel)
    }

    pub fn for_model(&self, model_id: &str) -> Result<&Weighting> {
        match self {
            DifficultyInput::Shared(w) => Ok(w),
            DifficultyInput::PerModel(map) => map.get(model_id).ok_or_else(|| {
                Error::ProvenanceError(format!("no confidence scores for model {model_id}"))
            }),
        }
    }

    pub fn method_id(&self) -> &'static str {
        match self {
            DifficultyInput::Shared(w) => w.scores.method.id(),
            DifficultyInput::PerModel(_) => Method::Wmprob { model_id: String::new() }.id(),
        }
    }

    pub fn split_config(&self) -> Option<&SplitConfig> {
        match self {
            DifficultyInput::Shared(w) => Some(&w.splits.config),
            DifficultyInput::PerModel(map) => map.values().next().map(|w| &w.splits.config),
        }
    }

    fn score_params(&self) -> BTreeMap<String, Value> {
        match self {
            DifficultyInput::Shared(w) => {
                let mut p = w.scores.params.clone();
                if let Method::Wood { p: pct } = w.scores.method {
                    p.insert("p".into(), pct.into());
                }
                p
            }
            DifficultyInput::PerModel(_) => BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub score_params: BTreeMap<String, Value>,
    pub splits: Option<SplitConfig>,
    pub scheme: WeightScheme,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case_id: Option<u8>,
    /// Extra caller-provided context (seed, input digests, …).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub model_id: String,
    pub overall: f64,
    pub normalized: bool,
    pub split_scores: Vec<Option<f64>>,
    pub accuracy: f64,
    pub baseline_rank: usize,
    pub changed: bool,
    /// `100 · accuracy − overall`; absent for unnormalized scores.
    pub inflation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardView {
    pub method: String,
    pub provenance: Provenance,
    pub rows: Vec<LeaderboardRow>,
    pub baseline_ranks: BTreeMap<String, usize>,
    pub changed: BTreeSet<String>,
    /// Kendall tau-b between accuracy and weighted scores.
    pub tau: f64,
    pub inflation: BTreeMap<String, Option<f64>>,
}

/// Model ids ordered by score descending, ties by id ascending.
pub fn rank_order(scores: &[(&str, f64)]) -> Vec<String> {
    let mut v = scores.to_vec();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    v.into_iter().map(|(id, _)| id.to_string()).collect()
}

/// Scores every run and compares the weighted order with the accuracy order.
pub fn build_leaderboard(
    runs: &[ModelRun],
    corpus: &Corpus,
    input: &DifficultyInput,
    scheme: &WeightScheme,
) -> Result<LeaderboardView> {
    build_leaderboard_with_metrics(runs, corpus, input, scheme).map(|(v, _)| v)
}

/// Like [`build_leaderboard`], also returning the per-model metric results
/// in leaderboard order.
pub fn build_leaderboard_with_metrics(
    runs: &[ModelRun],
    corpus: &Corpus,
    input: &DifficultyInput,
    scheme: &WeightScheme,
) -> Result<(LeaderboardView, Vec<MetricResult>)> {
    if runs.is_empty() {
        return Err(Error::config("no model runs"));
    }
    let mut seen = HashSet::new();
    for r in runs {
        if !seen.insert(r.model_id()) {
            return Err(Error::DuplicateModel(r.model_id().to_string()));
        }
    }
    let mut metrics: BTreeMap<String, (MetricResult, f64)> = BTreeMap::new();
    for run in runs {
        let w = input.for_model(run.model_id())?;
        let m = weighted_metric(run, corpus, &w.scores, &w.splits, scheme)?;
        let acc = accuracy(run, corpus)?;
        metrics.insert(run.model_id().to_string(), (m, acc));
    }
    let acc_scores: Vec<(&str, f64)> = metrics.iter().map(|(k, (_, a))| (k.as_str(), *a)).collect();
    let weighted: Vec<(&str, f64)> = metrics.iter().map(|(k, (m, _))| (k.as_str(), m.overall)).collect();
    let baseline_order = rank_order(&acc_scores);
    let order = rank_order(&weighted);
    let baseline_ranks: BTreeMap<String, usize> =
        baseline_order.iter().enumerate().map(|(i, id)| (id.clone(), i + 1)).collect();
    let tau = tau_b(
        &acc_scores.iter().map(|(_, v)| *v).collect::<Vec<_>>(),
        &weighted.iter().map(|(_, v)| *v).collect::<Vec<_>>(),
    )?;

    let mut rows = Vec::with_capacity(order.len());
    let mut changed = BTreeSet::new();
    let mut inflation = BTreeMap::new();
    let mut ordered_metrics = Vec::with_capacity(order.len());
    for (i, id) in order.iter().enumerate() {
        let (m, acc) = metrics.remove(id).expect("scored model");
        let baseline_rank = baseline_ranks[id];
        let is_changed = baseline_rank != i + 1;
        if is_changed {
            changed.insert(id.clone());
        }
        let infl = m.normalized.then_some(100.0 * acc - m.overall);
        inflation.insert(id.clone(), infl);
        rows.push(LeaderboardRow {
            rank: i + 1,
            model_id: id.clone(),
            overall: m.overall,
            normalized: m.normalized,
            split_scores: m.split_scores.clone(),
            accuracy: acc,
            baseline_rank,
            changed: is_changed,
            inflation: infl,
        });
        ordered_metrics.push(m);
    }
    let provenance = Provenance {
        method: input.method_id().to_string(),
        score_params: input.score_params(),
        splits: input.split_config().cloned(),
        scheme: scheme.clone(),
        case_id: scheme.case_id,
        extra: BTreeMap::new(),
    };
    Ok((
        LeaderboardView {
            method: input.method_id().to_string(),
            provenance,
            rows,
            baseline_ranks,
            changed,
            tau,
            inflation,
        },
        ordered_metrics,
    ))
}

/// Kendall rank correlation of two complete orderings of the same models.
///
/// ```
/// use eqlboard::leaderboard::kendall_tau;
/// let a = ["m1", "m2", "m3", "m4"];
/// let b = ["m2", "m1", "m3", "m4"];
/// assert!((kendall_tau(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-12);
/// ```
pub fn kendall_tau<S: AsRef<str>>(order_a: &[S], order_b: &[S]) -> Result<f64> {
    let pos_b: BTreeMap<&str, usize> =
        order_b.iter().enumerate().map(|(i, s)| (s.as_ref(), i)).collect();
    let set_a: BTreeSet<&str> = order_a.iter().map(AsRef::as_ref).collect();
    if order_a.len() != order_b.len()
        || set_a.len() != order_a.len()
        || pos_b.len() != order_b.len()
        || set_a.iter().any(|s| !pos_b.contains_key(s))
    {
        return Err(Error::SetMismatch);
    }
    let ranks_a: Vec<f64> = (0..order_a.len()).map(|i| i as f64).collect();
    let ranks_b: Vec<f64> = order_a.iter().map(|s| pos_b[s.as_ref()] as f64).collect();
    tau_b(&ranks_a, &ranks_b)
}

/// Tie-adjusted Kendall tau over paired observations. When either side has
/// no untied pair the statistic is undefined; that case returns 1.0 since no
/// pair can be discordant.
pub fn tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::SetMismatch);
    }
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i].total_cmp(&x[j]) as i64;
            let dy = y[i].total_cmp(&y[j]) as i64;
            match (dx, dy) {
                (0, 0) => {}
                (0, _) => tie_x += 1,
                (_, 0) => tie_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let denom = (((concordant + discordant + tie_x) * (concordant + discordant + tie_y)) as f64).sqrt();
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((concordant - discordant) as f64 / denom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InflationReport {
    pub per_model: BTreeMap<String, f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
}

/// Accuracy × 100 minus the weighted score, for every normalized row.
pub fn inflation_report(view: &LeaderboardView) -> InflationReport {
    let per_model: BTreeMap<String, f64> = view
        .rows
        .iter()
        .filter_map(|r| r.inflation.map(|v| (r.model_id.clone(), v)))
        .collect();
    let values: Vec<f64> = per_model.values().copied().collect();
    let (min, max, mean) = if values.is_empty() {
        (None, None, None)
    } else {
        (
            Some(values.iter().cloned().fold(f64::INFINITY, f64::min)),
            Some(values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)),
            Some(values.iter().sum::<f64>() / values.len() as f64),
        )
    };
    InflationReport { per_model, min, max, mean }
}

impl LeaderboardView {
    pub fn n_splits(&self) -> usize {
        self.rows.first().map_or(0, |r| r.split_scores.len())
    }

    pub fn order(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.model_id.as_str()).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable view");
        s.push('\n');
        s
    }

    /// `rank,model,score,split_1..split_n,baseline_rank,changed,inflation`
    pub fn to_csv(&self) -> String {
        let n = self.n_splits();
        let mut header = vec!["rank".to_string(), "model".into(), "score".into()];
        header.extend((1..=n).map(|i| format!("split_{i}")));
        header.extend(["baseline_rank".into(), "changed".into(), "inflation".into()]);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header).expect("in-memory csv");
        for r in &self.rows {
            let mut rec = vec![r.rank.to_string(), r.model_id.clone(), format_f64(r.overall)];
            rec.extend(r.split_scores.iter().map(|s| s.map(format_f64).unwrap_or_default()));
            rec.push(r.baseline_rank.to_string());
            rec.push(r.changed.to_string());
            rec.push(r.inflation.map(format_f64).unwrap_or_default());
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_cases() {
        let a = ["a", "b", "c", "d", "e"];
        assert_eq!(kendall_tau(&a, &a).unwrap(), 1.0);
        let rev = ["e", "d", "c", "b", "a"];
        assert_eq!(kendall_tau(&a, &rev).unwrap(), -1.0);
        assert_eq!(kendall_tau(&rev, &a).unwrap(), -1.0);
        assert!(matches!(kendall_tau(&a, &["a", "b", "c", "d", "x"]), Err(Error::SetMismatch)));
        assert!(matches!(kendall_tau(&a[..4], &a), Err(Error::SetMismatch)));
    }

    #[test]
    fn adjacent_swap_of_four() {
        // Six pairs, one discordant: (5 − 1) / 6.
        let t = kendall_tau(&["a", "b", "c", "d"], &["a", "c", "b", "d"]).unwrap();
        assert!((t - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn tau_b_with_ties() {
        // x ties on (0,1); y strictly increasing. C = 5, D = 0, Tx = 1:
        // 5 / sqrt(6 · 5).
        let t = tau_b(&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((t - 5.0 / 30f64.sqrt()).abs() < 1e-15);
        assert_eq!(tau_b(&[1.0, 1.0], &[2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(tau_b(&[1.0], &[2.0]).unwrap(), 1.0);
    }

    #[test]
    fn order_ties_by_id() {
        let o = rank_order(&[("b", 0.5), ("a", 0.5), ("c", 0.9)]);
        assert_eq!(o, ["c", "a", "b"]);
    }
}
