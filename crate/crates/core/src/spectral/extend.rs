//! Out-of-sample extension of an embedding by kernel-weighted averaging.

use super::{EmbeddingMatrix, Method};
use crate::aiml::kernel_pair_weight;
use crate::error::{config, Result};
use crate::graph::{dist2, KernelProfile};
use crate::manifolds::Sample;

fn weighted_rows(emb: &EmbeddingMatrix, weights: &[f64], query: &[f64]) -> Vec<f64> {
    let s = emb.dim();
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        let mut out = vec![0.0; s];
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                for (o, v) in out.iter_mut().zip(emb.values.row(i).iter()) {
                    *o += w * v;
                }
            }
        }
        return out.into_iter().map(|v| v / total).collect();
    }
    let mut best = (0, f64::INFINITY);
    for (i, smp) in emb.cloud.samples.iter().enumerate() {
        let d = dist2(&smp.x, query);
        if d < best.1 {
            best = (i, d);
        }
    }
    emb.row(best.0)
}

/// Average of embedding rows over training points within `r` of `query`,
/// weighted by `h(|x - query| / r)`; the nearest training point's row when
/// the ball is empty.
pub fn extend(emb: &EmbeddingMatrix, query: &[f64], r: f64, kernel: KernelProfile) -> Result<Vec<f64>> {
    if emb.cloud.is_empty() {
        return Err(config("cannot extend an embedding of an empty cloud"));
    }
    let weights: Vec<f64> = emb
        .cloud
        .samples
        .iter()
        .map(|s| {
            let d = dist2(&s.x, query).sqrt();
            if d <= r {
                kernel.eval(d / r)
            } else {
                0.0
            }
        })
        .collect();
    Ok(weighted_rows(emb, &weights, query))
}

/// Extension matched to the embedding's method: radius-graph embeddings
/// use the indicator kernel on ambient distance, augmentation-averaged
/// embeddings use the closed-form averaged weights.
pub fn extend_sample(emb: &EmbeddingMatrix, query: &Sample) -> Result<Vec<f64>> {
    match emb.method {
        Method::Cml => extend(emb, &query.x, emb.r, KernelProfile::Indicator),
        Method::Aiml => {
            if emb.cloud.is_empty() {
                return Err(config("cannot extend an embedding of an empty cloud"));
            }
            let model = &emb.cloud.model;
            let weights = emb
                .cloud
                .samples
                .iter()
                .map(|s| kernel_pair_weight(model, query, s, emb.r))
                .collect::<Result<Vec<f64>>>()?;
            Ok(weighted_rows(emb, &weights, &query.x))
        }
    }
}
