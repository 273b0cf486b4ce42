//! Downstream binary classification on frozen representations: label
//! patterns over components, logistic regression by full-batch gradient
//! descent, the hard-margin oracle and misclassification rates.

mod margin;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::manifolds::{sample_cloud, Sample};
use crate::rng::derive_seed;
use crate::spectral::{extend_sample, EmbeddingMatrix};

pub use margin::{max_margin_dual, max_margin_oracle, separability_margin, MarginSolution};

/// One sign per component.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelPattern {
    pub signs: Vec<i8>,
}

impl LabelPattern {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() || signs.iter().any(|s| *s != 1 && *s != -1) {
            return Err(config("label pattern needs signs in {-1, +1}"));
        }
        Ok(LabelPattern { signs })
    }

    /// Parse a string of `+` and `-` characters.
    pub fn parse(text: &str) -> Result<Self> {
        let signs = text
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(config(format!("pattern character {other:?} is not + or -"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::new(signs)
    }

    /// True when every component carries the same sign.
    pub fn is_degenerate(&self) -> bool {
        self.signs.iter().all(|&s| s == self.signs[0])
    }

    pub fn label(&self, k: usize) -> f64 {
        f64::from(self.signs[k])
    }
}

impl std::fmt::Display for LabelPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in &self.signs {
            f.write_str(if *s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

pub fn assign_labels(pattern: &LabelPattern, samples: &[Sample]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            pattern
                .signs
                .get(s.k)
                .map(|&v| f64::from(v))
                .ok_or_else(|| config(format!("component {} has no sign in the pattern", s.k)))
        })
        .collect()
}

/// Features with labels in `{-1, +1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSet {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    /// Whether the labeled points were drawn independently of the cloud the
    /// representation was learned on.
    pub independent: bool,
}

impl LabeledSet {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>, independent: bool) -> Result<Self> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(config("labeled set needs m >= 1 features with one label each"));
        }
        let s = features[0].len();
        if let Some(bad) = features.iter().find(|f| f.len() != s) {
            return Err(Error::DimensionMismatch {
                expected: s,
                got: bad.len(),
            });
        }
        if labels.iter().any(|y| *y != 1.0 && *y != -1.0) {
            return Err(config("labels must be -1 or +1"));
        }
        Ok(LabeledSet {
            features,
            labels,
            independent,
        })
    }

    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Empirical logistic risk `(1/m) sum ln(1 + exp(-y beta^T x))`.
pub fn logistic_loss(data: &LabeledSet, beta: &[f64]) -> f64 {
    data.features
        .iter()
        .zip(&data.labels)
        .map(|(x, y)| softplus(-y * dot(beta, x)))
        .sum::<f64>()
        / data.m() as f64
}

pub fn logistic_gradient(data: &LabeledSet, beta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; beta.len()];
    for (x, y) in data.features.iter().zip(&data.labels) {
        let c = -y * sigmoid(-y * dot(beta, x));
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi += c * xi;
        }
    }
    let m = data.m() as f64;
    g.iter_mut().for_each(|v| *v /= m);
    g
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub loss: f64,
    pub beta_norm: f64,
    /// Cosine between `beta_t` and the final `beta_T`.
    pub cosine_to_final: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    pub beta: Vec<f64>,
    /// Recorded at `t = 0`, every power of two, and `T`.
    pub trace: Vec<TracePoint>,
    pub iterations: usize,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Full-batch gradient descent from `beta = 0` with constant step `eta`.
pub fn logistic_gd(data: &LabeledSet, iterations: usize, eta: f64) -> Result<LogisticModel> {
    if iterations == 0 || !(eta > 0.0) {
        return Err(config("gradient descent needs T >= 1 and eta > 0"));
    }
    let mut beta = vec![0.0; data.dim()];
    let mut snapshots = vec![(0, logistic_loss(data, &beta), beta.clone())];
    for t in 1..=iterations {
        let g = logistic_gradient(data, &beta);
        for (b, gi) in beta.iter_mut().zip(&g) {
            *b -= eta * gi;
        }
        if t.is_power_of_two() || t == iterations {
            let loss = logistic_loss(data, &beta);
            if !loss.is_finite() || beta.iter().any(|b| !b.is_finite()) {
                return Err(Error::Numeric(format!("logistic loss became non-finite at step {t}")));
            }
            snapshots.push((t, loss, beta.clone()));
        }
    }
    let trace = snapshots
        .iter()
        .map(|(t, loss, b)| TracePoint {
            iteration: *t,
            loss: *loss,
            beta_norm: dot(b, b).sqrt(),
            cosine_to_final: cosine(b, &beta),
        })
        .collect();
    Ok(LogisticModel {
        beta,
        trace,
        iterations,
    })
}

/// `+1` when `beta^T x > 0`, else `-1`.
pub fn predict(beta: &[f64], x: &[f64]) -> f64 {
    if dot(beta, x) > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Fraction of test samples whose predicted label, computed on the
/// extended representation, differs from the pattern label.
pub fn misclassification(beta: &[f64], emb: &EmbeddingMatrix, test: &[Sample], pattern: &LabelPattern) -> Result<f64> {
    if test.is_empty() {
        return Err(config("misclassification needs test samples"));
    }
    let wrong = test
        .par_iter()
        .map(|s| -> Result<usize> {
            let theta = extend_sample(emb, s)?;
            Ok(usize::from(predict(beta, &theta) != pattern.label(s.k)))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(wrong as f64 / test.len() as f64)
}

/// Labeled set drawn independently of the training cloud.
#[derive(Clone, Debug)]
pub struct LabeledDraw {
    pub data: LabeledSet,
    pub samples: Vec<Sample>,
    /// Number of draws made; above 1 means stratification resampled.
    pub attempts: usize,
    /// Some component with positive weight has no labeled point.
    pub coverage_violated: bool,
}

const MAX_LABEL_DRAWS: usize = 1000;

/// Draw `m` fresh samples, embed them through `extend`, and label them by
/// `pattern`. With `stratify`, redraw until every component with positive
/// weight holds at least one labeled point.
pub fn draw_labeled_set(
    emb: &EmbeddingMatrix,
    pattern: &LabelPattern,
    m: usize,
    seed: u64,
    stratify: bool,
) -> Result<LabeledDraw> {
    let model = &emb.cloud.model;
    if pattern.signs.len() != model.k() {
        return Err(Error::DimensionMismatch {
            expected: model.k(),
            got: pattern.signs.len(),
        });
    }
    let needed: Vec<usize> = (0..model.k()).filter(|&k| model.weights[k] > 0.0).collect();
    let covers = |samples: &[Sample]| needed.iter().all(|k| samples.iter().any(|s| s.k == *k));
    let mut attempts = 0;
    let samples = loop {
        let cloud = sample_cloud(model, m, derive_seed(seed, "labeled", attempts as u64))?;
        attempts += 1;
        if !stratify || covers(&cloud.samples) || attempts == MAX_LABEL_DRAWS || m < needed.len() {
            break cloud.samples;
        }
    };
    let coverage_violated = !covers(&samples);
    let features = samples
        .par_iter()
        .map(|s| extend_sample(emb, s))
        .collect::<Result<Vec<_>>>()?;
    let labels = assign_labels(pattern, &samples)?;
    Ok(LabeledDraw {
        data: LabeledSet::new(features, labels, true)?,
        samples,
        attempts,
        coverage_violated,
    })
}

/// One downstream result row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DownstreamRow {
    pub method: String,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub pattern: String,
    pub xi: f64,
    /// Empty when the labeled set is not separable.
    pub margin: Option<f64>,
    pub iterations: usize,
}

pub fn write_downstream_csv<W: Write>(rows: &[DownstreamRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
