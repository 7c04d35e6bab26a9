use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::LabeledStream;
use crate::anomaly::{run_csax_detector, run_detector, DetectionEvent, DetectorConfig};
use crate::discretize::{gaussian_equiprobable_codebook, Symbol};
use crate::error::{Error, Result};
use crate::series::{paa_values, NormalizationStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)`, sorted, including both
    /// corners.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Significance levels swept by default, from strict to permissive.
pub fn default_alpha_sweep() -> Vec<f64> {
    vec![
        1e-12, 1e-10, 1e-8, 1e-6, 1e-5, 1e-4, 1e-3, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7,
        0.9, 0.99,
    ]
}

/// A window is positive if any raw sample it covers is labeled. Windows are
/// identified by the index of their last symbol.
pub fn window_labels(
    stream_labels: &[bool],
    segment_size: usize,
    window: usize,
    event_indices: impl IntoIterator<Item = usize>,
) -> Vec<bool> {
    let mut prefix = Vec::with_capacity(stream_labels.len() + 1);
    prefix.push(0usize);
    for &l in stream_labels {
        prefix.push(prefix.last().unwrap() + usize::from(l));
    }
    let count = |a: usize, b: usize| prefix[b.min(stream_labels.len())] - prefix[a.min(stream_labels.len())];
    event_indices
        .into_iter()
        .map(|j| {
            let first = (j + 1).saturating_sub(window) * segment_size;
            let end = (j + 1) * segment_size;
            count(first, end) > 0
        })
        .collect()
}

/// One ROC point per decision vector, each aligned with `labels`.
pub fn roc_from_decisions(decisions: &[Vec<bool>], labels: &[bool]) -> Result<RocCurve> {
    if decisions.is_empty() {
        return Err(Error::InvalidParams("empty alpha sweep".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    if negatives == 0 {
        return Err(Error::NoNegatives);
    }
    let mut points = vec![(0.0, 0.0), (1.0, 1.0)];
    for d in decisions {
        if d.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: d.len(),
                right: labels.len(),
            });
        }
        let (mut tp, mut fp) = (0usize, 0usize);
        for (&flag, &label) in d.iter().zip(labels) {
            if flag {
                if label {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    points.dedup();
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

/// ROC over detector runs at different significance levels. Every run must
/// report the same window positions.
pub fn roc_from_events(
    runs: &[Vec<DetectionEvent>],
    stream_labels: &[bool],
    window: usize,
    segment_size: usize,
) -> Result<RocCurve> {
    let Some(first) = runs.first() else {
        return Err(Error::InvalidParams("empty alpha sweep".into()));
    };
    let labels = window_labels(stream_labels, segment_size, window, first.iter().map(|e| e.index));
    let decisions = runs
        .iter()
        .map(|run| {
            if run.len() != first.len() || run.iter().zip(first).any(|(a, b)| a.index != b.index) {
                return Err(Error::LengthMismatch {
                    left: run.len(),
                    right: first.len(),
                });
            }
            Ok(run.iter().map(|e| e.flag.is_anomalous()).collect())
        })
        .collect::<Result<Vec<Vec<bool>>>>()?;
    roc_from_decisions(&decisions, &labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "detector", rename_all = "snake_case")]
pub enum DetectorKind {
    /// Fixed Gaussian-equiprobable alphabet over the stream normalized with
    /// its own global statistics.
    SaxGof { alphabet: usize },
    /// Mean-shift alphabet re-estimated online; `pretrain_fraction` of the
    /// stream is used for the initial clusters and not scored.
    CsaxGof { pretrain_fraction: f64 },
}

/// Runs a detector once per significance level and builds its ROC curve.
pub fn detector_roc(
    stream: &LabeledStream,
    kind: DetectorKind,
    window: usize,
    segment_size: usize,
    alphas: &[f64],
) -> Result<RocCurve> {
    if segment_size == 0 {
        return Err(Error::InvalidParams("segment size must be at least 1".into()));
    }
    match kind {
        DetectorKind::SaxGof { alphabet } => {
            let stats = NormalizationStats::of(&stream.values)?;
            let usable = stream.len() - stream.len() % segment_size;
            let normalized: Vec<f64> = stream.values[..usable].iter().map(|&v| stats.apply(v)).collect();
            let reduced = paa_values(&normalized, usable / segment_size)?;
            let codebook = gaussian_equiprobable_codebook(alphabet)?;
            let symbols: Vec<Symbol> = reduced.iter().map(|&v| codebook.quantize(v)).collect();
            let runs = alphas
                .par_iter()
                .map(|&alpha| run_detector(&symbols, &DetectorConfig { window, alpha, alphabet }))
                .collect::<Result<Vec<_>>>()?;
            roc_from_events(&runs, &stream.labels, window, segment_size)
        }
        DetectorKind::CsaxGof { pretrain_fraction } => {
            if !(0.0..1.0).contains(&pretrain_fraction) {
                return Err(Error::OutOfRange {
                    what: "pretraining fraction",
                    value: pretrain_fraction,
                });
            }
            let split = ((pretrain_fraction * stream.len() as f64) as usize) / segment_size * segment_size;
            let (pre, rest) = stream.values.split_at(split);
            let runs = alphas
                .par_iter()
                .map(|&alpha| {
                    let cfg = DetectorConfig {
                        window,
                        alpha,
                        alphabet: 0,
                    };
                    run_csax_detector(rest, &cfg, pre, segment_size)
                })
                .collect::<Result<Vec<_>>>()?;
            roc_from_events(&runs, &stream.labels[split..], window, segment_size)
        }
    }
}
