//! k-means on embedding coordinates and permutation-invariant accuracy.

use nalgebra::DMatrix;
use rand::Rng;

use super::EmbeddingMatrix;
use crate::error::{config, Result};
use crate::rng::stream;

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub accuracy: f64,
    pub inertia: f64,
}

fn d2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, ctr) in centers.iter().enumerate() {
        let d = d2(p, ctr);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> (Vec<usize>, f64) {
    let dim = points[0].len();
    let k = centers.len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..300 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let c = nearest(p, &centers).0;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed an empty cluster at the worst-served point
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        nearest(&points[a], &centers)
                            .1
                            .total_cmp(&nearest(&points[b], &centers).1)
                            .then(b.cmp(&a))
                    })
                    .expect("non-empty");
                centers[c] = points[far].clone();
                changed = true;
            } else {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points.iter().map(|p| nearest(p, &centers).1).sum();
    let labels = points.iter().map(|p| nearest(p, &centers).0).collect();
    (labels, inertia)
}

/// Best of `restarts` k-means++ initializations followed by Lloyd
/// iterations.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> Result<(Vec<usize>, f64)> {
    if points.is_empty() || k == 0 {
        return Err(config("k-means needs points and at least one center"));
    }
    let k = k.min(points.len());
    let mut best: Option<(Vec<usize>, f64)> = None;
    for t in 0..restarts.max(1) {
        let mut rng = stream(seed, "kmeans", t as u64);
        let mut centers = vec![points[rng.gen_range(0..points.len())].clone()];
        while centers.len() < k {
            let dist: Vec<f64> = points.iter().map(|p| nearest(p, &centers).1).collect();
            let total: f64 = dist.iter().sum();
            let pick = if total > 0.0 {
                let mut u = rng.gen::<f64>() * total;
                let mut idx = points.len() - 1;
                for (i, d) in dist.iter().enumerate() {
                    if u < *d {
                        idx = i;
                        break;
                    }
                    u -= d;
                }
                idx
            } else {
                rng.gen_range(0..points.len())
            };
            centers.push(points[pick].clone());
        }
        let run = lloyd(points, centers);
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Maximum-weight perfect matching on a square matrix; returns the column
/// assigned to each row and the total weight.
pub fn hungarian_max(weight: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = weight.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let top = weight.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    // shortest augmenting path on costs top - w (1-based potentials)
    let cost = |i: usize, j: usize| top - weight[i - 1][j - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    let total = (0..n).map(|i| weight[i][assign[i]]).sum();
    (assign, total)
}

/// Fraction of points whose predicted cluster maps to their true label
/// under the best one-to-one relabeling.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if pred.is_empty() {
        return 1.0;
    }
    let size = pred.iter().chain(truth).max().map_or(0, |m| m + 1);
    let mut conf = vec![vec![0.0; size]; size];
    for (&a, &b) in pred.iter().zip(truth) {
        conf[a][b] += 1.0;
    }
    hungarian_max(&conf).1 / pred.len() as f64
}

/// k-means with `k` centers on the first `k` embedding coordinates, scored
/// against the true component labels.
pub fn spectral_cluster(emb: &EmbeddingMatrix, k: usize, restarts: usize, seed: u64) -> Result<Clustering> {
    let cols = k.min(emb.dim());
    let pts = rows(&emb.values, cols);
    let (labels, inertia) = kmeans(&pts, k, restarts, seed)?;
    let accuracy = clustering_accuracy(&labels, &emb.cloud.labels());
    Ok(Clustering {
        labels,
        accuracy,
        inertia,
    })
}

fn rows(m: &DMatrix<f64>, cols: usize) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..cols).map(|c| m[(i, c)]).collect())
        .collect()
}
