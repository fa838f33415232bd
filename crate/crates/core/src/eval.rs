//! Clustering rate with best label matching, and per-group summaries.

use itertools::Itertools;

use crate::cluster::ClusterLabels;
use crate::error::{Error, Result};

/// Largest cluster count accepted by [`clustering_rate`].
pub const MAX_RATE_CLUSTERS: usize = 8;

/// Fraction of points whose predicted label matches the truth after the best
/// relabeling of the prediction.
pub fn clustering_rate(pred: &ClusterLabels, truth: &ClusterLabels) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidParameter(format!(
            "prediction has {} labels, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    let k = pred.k().max(truth.k());
    if k > MAX_RATE_CLUSTERS {
        return Err(Error::InvalidParameter(format!(
            "clustering rate supports at most {MAX_RATE_CLUSTERS} clusters, got {k}"
        )));
    }
    if pred.is_empty() {
        return Ok(1.0);
    }
    let mut counts = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        counts[p][t] += 1;
    }
    let best = (0..k)
        .permutations(k)
        .map(|perm| (0..k).map(|p| counts[p][perm[p]]).sum::<usize>())
        .max()
        .unwrap_or(0);
    Ok(best as f64 / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub method: String,
    pub dataset: String,
    pub trial: usize,
    pub seed: u64,
    pub rate: f64,
    pub affinity_ms: f64,
    pub spectral_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub method: String,
    pub dataset: String,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub trials: usize,
    pub mean_total_ms: f64,
}

/// Mean and population std of the rate per `(method, dataset)`, in order of
/// first appearance.
pub fn summarize(trials: &[TrialResult]) -> Vec<Summary> {
    let mut groups: Vec<((&str, &str), Vec<&TrialResult>)> = Vec::new();
    for t in trials {
        let key = (t.method.as_str(), t.dataset.as_str());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(t),
            None => groups.push((key, vec![t])),
        }
    }
    groups
        .into_iter()
        .map(|((method, dataset), group)| {
            let n = group.len() as f64;
            let mean = group.iter().map(|t| t.rate).sum::<f64>() / n;
            let var = group.iter().map(|t| (t.rate - mean).powi(2)).sum::<f64>() / n;
            Summary {
                method: method.to_string(),
                dataset: dataset.to_string(),
                mean,
                std: var.sqrt(),
                trials: group.len(),
                mean_total_ms: group.iter().map(|t| t.total_ms).sum::<f64>() / n,
            }
        })
        .collect()
}
