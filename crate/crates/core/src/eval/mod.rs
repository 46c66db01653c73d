//! Metrics, view-based splitting, the detector and grasp selection.

mod select;
mod split;

pub use select::{select_grasp, SelectionConfig};
pub use split::{leave_one_object_out, split_by_view};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::candgen::{CandidateSampler, GraspCandidate, HandGeometry, SamplerConfig};
use crate::cloud::{CloudWithViewpoints, RegionOfInterest};
use crate::dataset::{Dataset, SplitSpec};
use crate::encode::{CloudEncoder, EncodeConfig, Variant};
use crate::error::{Error, Result};
use crate::learn::{accuracy, predict_indices, predict_scores, CnnModel};

/// Default precision floor for recall-at-high-precision.
pub const HIGH_PRECISION: f64 = 0.99;

/// Threshold used when no validation curve reaches the precision floor.
pub const FALLBACK_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredGrasp {
    pub candidate: GraspCandidate,
    pub score: f64,
    /// Position of the candidate in the sampler's output.
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision/recall at every distinct score, thresholds descending.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,precision,recall\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
        }
        s
    }
}

/// A point counts scores `≥ threshold` as predicted positive.
pub fn pr_curve(scores: &[f64], labels: &[u8]) -> Result<PrCurve> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    let total_pos = labels.iter().filter(|&&l| l == 1).count();
    if total_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold: t,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / total_pos as f64,
        });
    }
    Ok(PrCurve { points })
}

/// Largest recall among points with precision at least `min_precision`, or 0.
pub fn recall_at_precision(curve: &PrCurve, min_precision: f64) -> f64 {
    curve
        .points
        .iter()
        .filter(|p| p.precision >= min_precision)
        .map(|p| p.recall)
        .fold(0.0, f64::max)
}

/// Highest threshold attaining [`recall_at_precision`], if any point meets
/// the floor.
pub fn threshold_at_precision(curve: &PrCurve, min_precision: f64) -> Option<f64> {
    let best = recall_at_precision(curve, min_precision);
    curve
        .points
        .iter()
        .filter(|p| p.precision >= min_precision && p.recall == best && best > 0.0)
        .map(|p| p.threshold)
        .reduce(f64::max)
}

/// Operating threshold from a validation curve, falling back to 0.5.
pub fn operating_threshold(curve: &PrCurve, min_precision: f64) -> f64 {
    threshold_at_precision(curve, min_precision).unwrap_or(FALLBACK_THRESHOLD)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub rahp: f64,
    pub min_precision: f64,
    pub test_count: usize,
    pub test_positives: usize,
    pub curve: PrCurve,
}

impl EvalReport {
    /// Writes `<stem>.json` and `<stem>.csv` (the curve).
    pub fn write(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(json_path, json).map_err(|e| Error::io(json_path, e))?;
        std::fs::write(csv_path, self.curve.to_csv()).map_err(|e| Error::io(csv_path, e))
    }
}

pub fn evaluate_scores(scores: &[f64], labels: &[u8], min_precision: f64) -> Result<EvalReport> {
    if scores.is_empty() {
        return Err(Error::EmptySplit("test side is empty".into()));
    }
    let curve = pr_curve(scores, labels)?;
    Ok(EvalReport {
        accuracy: accuracy(scores, labels),
        rahp: recall_at_precision(&curve, min_precision),
        min_precision,
        test_count: scores.len(),
        test_positives: labels.iter().filter(|&&l| l == 1).count(),
        curve,
    })
}

/// Accuracy, precision-recall curve and RAHP@0.99 on the test side.
pub fn evaluate_model(model: &CnnModel, dataset: &Dataset, split: &SplitSpec) -> Result<EvalReport> {
    if split.test.is_empty() {
        return Err(Error::EmptySplit("test side is empty".into()));
    }
    let scores = predict_indices(model, dataset, &split.test)?;
    let labels: Vec<u8> = split.test.iter().map(|&i| dataset.records()[i].label).collect();
    evaluate_scores(&scores, &labels, HIGH_PRECISION)
}

/// Candidate generation and encoding settings used by [`detect`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    pub sampler: SamplerConfig,
    pub encode: EncodeConfig,
    pub seed: u64,
}

/// Samples, encodes and scores candidates, keeping those with
/// `score ≥ threshold`, ordered by score descending then sampler index.
pub fn detect(
    cloud: &CloudWithViewpoints,
    roi: &RegionOfInterest,
    hand: &HandGeometry,
    model: &CnnModel,
    variant: Variant,
    threshold: f64,
    config: &DetectConfig,
) -> Result<Vec<ScoredGrasp>> {
    if model.arch().channels != variant.channels() {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} channels, variant {variant} has {}",
            model.arch().channels,
            variant.channels()
        )));
    }
    let candidates = CandidateSampler::new(cloud, *hand, config.sampler)?.sample(roi, config.seed)?;
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let images = CloudEncoder::new(cloud, config.encode)?.encode_all(&candidates, variant)?;
    let scores = predict_scores(model, &images)?;
    let mut out: Vec<ScoredGrasp> = candidates
        .into_iter()
        .zip(scores)
        .enumerate()
        .filter(|(_, (_, s))| *s >= threshold)
        .map(|(index, (candidate, score))| ScoredGrasp {
            candidate,
            score,
            index,
        })
        .collect();
    sort_scored(&mut out);
    Ok(out)
}

/// Score descending, then sampler index ascending.
pub fn sort_scored(grasps: &mut [ScoredGrasp]) {
    grasps.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
}
