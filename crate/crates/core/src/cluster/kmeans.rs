use std::cmp::Ordering;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ClusterLabels;
use crate::error::{Error, Result};

pub const KMEANS_RESTARTS: usize = 20;
pub const KMEANS_MAX_ITER: usize = 300;
/// Lloyd iterations stop once the relative inertia change drops below this.
pub const KMEANS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: ClusterLabels,
    /// One centroid per row.
    pub centroids: DMatrix<f64>,
    pub inertia: f64,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Run {
    labels: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    inertia: f64,
}

fn plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &rows[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            if d2[pick] == 0.0 {
                pick = (0..n).rev().find(|&i| d2[i] > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // Fewer distinct points than clusters.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &rows[next]));
        }
    }
    chosen.into_iter().map(|i| rows[i].clone()).collect()
}

fn assign(rows: &[Vec<f64>], centroids: &[Vec<f64>], labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, r) in rows.iter().enumerate() {
        let (best, d) = centroids
            .iter()
            .enumerate()
            .map(|(c, m)| (c, sq_dist(r, m)))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        labels[i] = best;
        inertia += d;
    }
    inertia
}

fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> Run {
    let n = rows.len();
    let k = centroids.len();
    let dim = rows[0].len();
    let mut labels = vec![0; n];
    let mut inertia = assign(rows, &centroids, &mut labels);
    for _ in 0..KMEANS_MAX_ITER {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(r) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        // Re-seed each empty cluster from the point farthest from its centroid.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n).filter(|&i| counts[labels[i]] > 1).max_by(|&a, &b| {
                sq_dist(&rows[a], &centroids[labels[a]])
                    .total_cmp(&sq_dist(&rows[b], &centroids[labels[b]]))
                    .then(b.cmp(&a))
            });
            if let Some(i) = far {
                counts[labels[i]] -= 1;
                labels[i] = c;
                counts[c] = 1;
                centroids[c] = rows[i].clone();
            }
        }
        let next = assign(rows, &centroids, &mut labels);
        let change = (inertia - next).abs();
        inertia = next;
        if change <= KMEANS_TOL * inertia || inertia == 0.0 {
            break;
        }
    }
    Run {
        labels,
        centroids,
        inertia,
    }
}

/// k-means with k-means++ seeding and `restarts` runs of Lloyd's algorithm;
/// the run with the lowest inertia wins.
///
/// Rows are processed in lexicographic order and clusters are numbered by
/// their lexicographically smallest member, so the result does not depend on
/// the input order of the rows.
pub fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64, restarts: usize) -> Result<KMeansFit> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} must be in 1..={n}")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("k-means input has non-finite entries".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let raw: Vec<Vec<f64>> = points.row_iter().map(|r| r.iter().copied().collect()).collect();
    order.sort_by(|&a, &b| lex_cmp(&raw[a], &raw[b]).then(a.cmp(&b)));
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| raw[i].clone()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Run> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(&rows, plus_plus(&rows, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");

    // Renumber clusters by first appearance in sorted order.
    let mut renumber = vec![usize::MAX; k];
    let mut next = 0;
    for &l in &best.labels {
        if renumber[l] == usize::MAX {
            renumber[l] = next;
            next += 1;
        }
    }
    for r in renumber.iter_mut().filter(|r| **r == usize::MAX) {
        *r = next;
        next += 1;
    }
    let mut labels = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = renumber[best.labels[pos]];
    }
    let dim = points.ncols();
    let mut centroids = DMatrix::zeros(k, dim);
    for (c, m) in best.centroids.iter().enumerate() {
        for (d, v) in m.iter().enumerate() {
            centroids[(renumber[c], d)] = *v;
        }
    }
    Ok(KMeansFit {
        labels: ClusterLabels::new(labels, k)?,
        centroids,
        inertia: best.inertia,
    })
}
