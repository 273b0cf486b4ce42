//! Augmentation-averaged weights and the corresponding Laplacian.
//!
//! The averaged weight of a pair is the probability that two independent
//! augmentations of the pair land within distance `r`. It is estimated by
//! Monte Carlo, or approximated in closed form from the signal geodesic
//! distance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::graph::{
    dist2, radius_pairs, surface_tension, unit_ball_volume, KernelProfile, LaplacianMatrix,
    Normalization,
};
use crate::manifolds::{min_separation, MultiManifoldModel, PointCloud, Sample};
use crate::rng::{derive_seed, stream};
use crate::sparse::SymCsr;

pub const DEFAULT_N_AUG: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightMode {
    MonteCarlo { n_aug: usize },
    Kernel,
}

impl WeightMode {
    pub fn name(&self) -> &'static str {
        match self {
            WeightMode::MonteCarlo { .. } => "monte-carlo",
            WeightMode::Kernel => "kernel",
        }
    }
}

/// Sparse symmetric averaged weights.
#[derive(Clone, Debug, PartialEq)]
pub struct AimlWeights {
    pub r: f64,
    pub mode: WeightMode,
    pub weights: SymCsr,
    /// Augmentation pairs drawn per Monte Carlo entry.
    pub n_aug: usize,
    /// Entries estimated by Monte Carlo (all candidates in Monte Carlo mode,
    /// cross-component fallbacks in kernel mode).
    pub mc_entries: usize,
    pub dim: usize,
    pub signal_dim: usize,
    pub nuisance_dim: usize,
}

/// Candidate pairs `i < j` whose averaged weight can be nonzero. When all
/// components embed their fibers on the same ambient axes, the remaining
/// axes are unchanged by augmentation and their distance alone decides;
/// otherwise the ambient radius is widened by twice the fiber diameter.
fn candidate_pairs(cloud: &PointCloud, r: f64) -> Vec<Vec<(usize, f64)>> {
    let m = &cloud.model;
    let mask = m.components[0].nuisance_mask();
    let shared = m.components.iter().all(|c| c.nuisance_mask() == mask);
    if shared {
        let proj: Vec<Vec<f64>> = cloud
            .samples
            .iter()
            .map(|s| {
                s.x.iter()
                    .zip(&mask)
                    .filter(|(_, &nu)| !nu)
                    .map(|(v, _)| *v)
                    .collect()
            })
            .collect();
        radius_pairs(&proj, r)
    } else {
        let diam = m
            .components
            .iter()
            .map(|c| c.fiber_diameter())
            .fold(0.0, f64::max);
        let pts: Vec<Vec<f64>> = cloud.samples.iter().map(|s| s.x.clone()).collect();
        radius_pairs(&pts, r + 2.0 * diam)
    }
}

/// Monte Carlo estimate of one averaged weight.
fn mc_pair(model: &MultiManifoldModel, a: &Sample, b: &Sample, r: f64, n_aug: usize, seed: u64) -> f64 {
    let (ca, cb) = (&model.components[a.k], &model.components[b.k]);
    let (fa, fb) = (ca.nuisance_part(), cb.nuisance_part());
    if fa.is_none() && fb.is_none() {
        return if dist2(&a.x, &b.x) <= r * r { 1.0 } else { 0.0 };
    }
    let mut rng = stream(seed, "aug-pair", 0);
    let r2 = r * r;
    let mut hits = 0usize;
    for _ in 0..n_aug {
        let xa = match fa {
            Some(f) => ca.embed(&a.phi, &f.sample_latent(&mut rng).0),
            None => a.x.clone(),
        };
        let xb = match fb {
            Some(f) => cb.embed(&b.phi, &f.sample_latent(&mut rng).0),
            None => b.x.clone(),
        };
        if dist2(&xa, &xb) <= r2 {
            hits += 1;
        }
    }
    hits as f64 / n_aug as f64
}

fn pair_seed(seed: u64, i: usize, j: usize) -> u64 {
    derive_seed(seed, "aiml-pair", ((i as u64) << 32) | j as u64)
}

fn finish(
    cloud: &PointCloud,
    r: f64,
    mode: WeightMode,
    n_aug: usize,
    mc_entries: usize,
    triplets: Vec<(usize, usize, f64)>,
) -> AimlWeights {
    let m = &cloud.model;
    AimlWeights {
        r,
        mode,
        weights: SymCsr::from_upper_triplets(cloud.len(), &triplets),
        n_aug,
        mc_entries,
        dim: m.dim(),
        signal_dim: m.signal_dim(),
        nuisance_dim: m.nuisance_dim(),
    }
}

/// Monte Carlo averaged weights with `n_aug` independent augmentation pairs
/// per candidate entry, each entry on its own keyed stream.
pub fn mc_weights(cloud: &PointCloud, r: f64, n_aug: usize, seed: u64) -> Result<AimlWeights> {
    if n_aug == 0 {
        return Err(config("n_aug must be at least 1"));
    }
    check_radius(r)?;
    let cand = candidate_pairs(cloud, r);
    let s = &cloud.samples;
    let model = &cloud.model;
    let rows: Vec<Vec<(usize, usize, f64)>> = cand
        .into_par_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .map(|(j, _)| (i, j, mc_pair(model, &s[i], &s[j], r, n_aug, pair_seed(seed, i, j))))
                .collect()
        })
        .collect();
    let triplets: Vec<_> = rows.into_iter().flatten().collect();
    let count = triplets.len();
    Ok(finish(cloud, r, WeightMode::MonteCarlo { n_aug }, n_aug, count, triplets))
}

/// Signal geodesic distance between two samples of the same component.
fn signal_distance(model: &MultiManifoldModel, a: &Sample, b: &Sample) -> Result<f64> {
    let axes = model.components[a.k].signal_axes()?;
    Ok(axes
        .iter()
        .zip(a.phi.iter().zip(&b.phi))
        .map(|(ax, (p, q))| ax.distance(*p, *q).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Closed-form weight `r^{d_v} V_{d_v} / Vol(fiber) (1 - d^2 / r^2)_+^{d_v / 2}`
/// for a same-component pair, clamped to `[0, 1]`. Trivial fibers use the
/// exact ambient indicator.
fn kernel_same(model: &MultiManifoldModel, a: &Sample, b: &Sample, r: f64) -> Result<f64> {
    let c = &model.components[a.k];
    let Some(fiber) = c.nuisance_part() else {
        return Ok(if dist2(&a.x, &b.x) <= r * r { 1.0 } else { 0.0 });
    };
    let dv = c.nuisance_dim();
    let d = signal_distance(model, a, b)?;
    let h = KernelProfile::AimlProfile { nuisance_dim: dv }.eval(d / r);
    let w = r.powi(dv as i32) * unit_ball_volume(dv) / fiber.geometry().volume * h;
    Ok(w.clamp(0.0, 1.0))
}

/// Closed-form averaged weights; cross-component pairs are 0 when the
/// components are farther apart than `r` and estimated by Monte Carlo
/// (`DEFAULT_N_AUG` draws) otherwise.
pub fn kernel_weights(cloud: &PointCloud, r: f64) -> Result<AimlWeights> {
    check_radius(r)?;
    let model = &cloud.model;
    for c in &model.components {
        c.signal_axes()?;
    }
    let cross_needs_mc = match min_separation(model) {
        Ok(delta) => model.k() > 1 && delta <= r,
        Err(_) => model.k() > 1,
    };
    let cand = candidate_pairs(cloud, r);
    let s = &cloud.samples;
    let seed = derive_seed(cloud.seed, "aiml-fallback", 0);
    let rows: Vec<Result<Vec<(usize, usize, f64, bool)>>> = cand
        .into_par_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut out = Vec::new();
            for (j, _) in row {
                if s[i].k == s[j].k {
                    out.push((i, j, kernel_same(model, &s[i], &s[j], r)?, false));
                } else if cross_needs_mc {
                    let w = mc_pair(model, &s[i], &s[j], r, DEFAULT_N_AUG, pair_seed(seed, i, j));
                    out.push((i, j, w, true));
                }
            }
            Ok(out)
        })
        .collect();
    let mut triplets = Vec::new();
    let mut mc = 0;
    for row in rows {
        for (i, j, w, fallback) in row? {
            mc += usize::from(fallback);
            triplets.push((i, j, w));
        }
    }
    Ok(finish(cloud, r, WeightMode::Kernel, DEFAULT_N_AUG, mc, triplets))
}

/// Closed-form weight between two arbitrary samples of `model` (used to
/// extend embeddings to new points). Cross-component pairs get 0.
pub fn kernel_pair_weight(model: &MultiManifoldModel, a: &Sample, b: &Sample, r: f64) -> Result<f64> {
    if a.k != b.k {
        return Ok(0.0);
    }
    kernel_same(model, a, b, r)
}

/// `L = D - W` over the averaged weights. Energies use `r^(d+2)` with
/// `d = d_s + d_v` and the surface tension of `(1 - t^2)_+^{d_v/2}` in
/// `d_s` dimensions; normalized eigenvalues are divided by `V_{d_v}` so
/// they approximate the signal-operator spectrum.
pub fn aiml_laplacian(w: &AimlWeights, n: usize) -> LaplacianMatrix {
    let kernel = KernelProfile::AimlProfile {
        nuisance_dim: w.nuisance_dim,
    };
    let norm = Normalization {
        sigma: surface_tension(kernel, w.signal_dim.max(1)),
        n,
        r: w.r,
        dim: w.dim,
        eigen_scale: 1.0 / unit_ball_volume(w.nuisance_dim),
    };
    LaplacianMatrix::from_weights(w.weights.clone(), norm)
}

fn check_radius(r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(config(format!("radius must be positive, got {r}")))
    }
}

/// Exact averaged weight for two points whose fibers are circles of the same
/// radius embedded on shared axes: probability that a uniform fiber chord
/// fits in the budget left by the signal chord.
pub fn circle_fiber_weight(signal_chord: f64, fiber_radius: f64, r: f64) -> f64 {
    let budget = r * r - signal_chord * signal_chord;
    if budget < 0.0 {
        return 0.0;
    }
    let a = budget.sqrt() / (2.0 * fiber_radius);
    2.0 / std::f64::consts::PI * a.min(1.0).asin()
}
