//! Synthetic multi-manifold models: construction, sampling, augmentation,
//! separation distances, analytic spectra and regime checks.
//!
//! Component indices are 0-based in memory and 1-based in every exported
//! file.

mod io;
mod regime;
mod separation;
mod spec;
mod spectrum;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::rng::{stream, StreamRng};

pub use io::{read_cloud_csv, write_cloud_csv, ModelDescriptor};
pub use regime::{validate_regime, RegimeReport};
pub use separation::min_separation;
pub use spec::{
    cell_bounds, AxisKind, GeometricConstants, LatentAxis, ManifoldSpec, SignalDensity,
};
pub use spectrum::{analytic_spectrum, AnalyticEigenfunction, Operator};

/// Mixture of component manifolds sharing one ambient space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiManifoldModel {
    pub components: Vec<ManifoldSpec>,
    pub weights: Vec<f64>,
}

impl MultiManifoldModel {
    /// Validated model. Zero weights are allowed and yield empty components.
    pub fn new(components: Vec<ManifoldSpec>, weights: Vec<f64>) -> Result<Self> {
        let m = MultiManifoldModel {
            components,
            weights,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn uniform(components: Vec<ManifoldSpec>) -> Result<Self> {
        let k = components.len().max(1);
        Self::new(components, vec![1.0 / k as f64; k])
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(config("model needs at least one component"));
        }
        if self.weights.len() != self.components.len() {
            return Err(config("one weight per component is required"));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(config("weights must be non-negative"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(config(format!("weights sum to {total}, expected 1")));
        }
        for c in &self.components {
            c.validate()?;
        }
        let first = &self.components[0];
        let key = |c: &ManifoldSpec| (c.ambient_dim(), c.signal_dim(), c.nuisance_dim());
        if let Some(bad) = self.components.iter().find(|c| key(c) != key(first)) {
            return Err(config(format!(
                "components disagree on (D, d_s, d_v): {:?} vs {:?}",
                key(first),
                key(bad)
            )));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.components[0].ambient_dim()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn signal_dim(&self) -> usize {
        self.components[0].signal_dim()
    }

    pub fn nuisance_dim(&self) -> usize {
        self.components[0].nuisance_dim()
    }

    /// Worst-case geometric constants over the components.
    pub fn geometry(&self) -> GeometricConstants {
        let mut g = self.components[0].geometry();
        for c in &self.components[1..] {
            let h = c.geometry();
            g.reach = g.reach.min(h.reach);
            g.injectivity = g.injectivity.min(h.injectivity);
            g.curvature = g.curvature.max(h.curvature);
            g.volume = g.volume.min(h.volume);
        }
        g
    }

    /// Largest density bound over the components.
    pub fn density_bound(&self) -> f64 {
        self.components
            .iter()
            .map(ManifoldSpec::density_bound)
            .fold(1.0, f64::max)
    }

    fn draw_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for (k, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last = k;
                if u < acc {
                    return k;
                }
            }
        }
        last
    }

    /// Draw one sample from a caller-provided stream.
    pub fn sample_with(&self, rng: &mut StreamRng) -> Sample {
        let k = self.draw_component(rng);
        let c = &self.components[k];
        let (phi, psi) = c.sample_latent(rng);
        let x = c.embed(&phi, &psi);
        Sample { x, k, phi, psi }
    }
}

/// One embedded point with its latent coordinates and component index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    /// 0-based component index.
    pub k: usize,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Immutable ordered sample set together with the model that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub samples: Vec<Sample>,
    pub model: MultiManifoldModel,
    pub seed: u64,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn points(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.x.as_slice()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.k).collect()
    }
}

/// Draw `n` independent samples. Sample `i` uses its own keyed stream so
/// the result does not depend on evaluation order.
pub fn sample_cloud(model: &MultiManifoldModel, n: usize, seed: u64) -> Result<PointCloud> {
    model.validate()?;
    if n == 0 {
        return Err(config("sample count must be at least 1"));
    }
    let samples = (0..n as u64)
        .map(|i| model.sample_with(&mut stream(seed, "sample", i)))
        .collect();
    Ok(PointCloud {
        samples,
        model: model.clone(),
        seed,
    })
}

/// Redraw the nuisance coordinate of `s` uniformly on its fiber.
pub fn augment(model: &MultiManifoldModel, s: &Sample, seed: u64) -> Result<Sample> {
    augment_with(model, s, &mut stream(seed, "augment", 0))
}

pub fn augment_with(model: &MultiManifoldModel, s: &Sample, rng: &mut StreamRng) -> Result<Sample> {
    let c = model
        .components
        .get(s.k)
        .ok_or_else(|| config(format!("sample component {} out of range", s.k)))?;
    let Some(fiber) = c.nuisance_part() else {
        return Ok(s.clone());
    };
    let psi = fiber.sample_latent(rng).0;
    let x = c.embed(&s.phi, &psi);
    Ok(Sample {
        x,
        k: s.k,
        phi: s.phi.clone(),
        psi,
    })
}

/// Two copies of `base`, the second lifted by `offset` along a fresh axis.
pub fn parallel_copies_model(base: &ManifoldSpec, offset: f64) -> Result<MultiManifoldModel> {
    if !(offset.is_finite() && offset > 0.0) {
        return Err(config(format!("copy offset must be positive, got {offset}")));
    }
    MultiManifoldModel::new(
        vec![base.clone().offset_copy(0.0), base.clone().offset_copy(offset)],
        vec![0.5, 0.5],
    )
}

/// Hard testing instance: the unit cube with grid cell `cell` removed, and
/// the centered sub-cube of side `1/(3 grid)` inside that cell.
pub fn lowerbound_model(dim: usize, grid: usize, cell: usize) -> Result<MultiManifoldModel> {
    let outer = ManifoldSpec::CubeMinusCell { dim, grid, cell };
    outer.validate()?;
    let (lo, _) = cell_bounds(dim, grid, cell);
    let g = grid as f64;
    let side = 1.0 / (3.0 * g);
    let inner = ManifoldSpec::FlatCube {
        sides: vec![side; dim],
        lower: Some(lo.iter().map(|a| a + side).collect()),
        periodic: false,
        density: SignalDensity::Uniform,
    };
    let v_out = 1.0 - g.powi(-(dim as i32));
    let v_in = side.powi(dim as i32);
    // Uniform on the union, so each piece is weighted by its volume.
    let w_in = v_in / (v_out + v_in);
    MultiManifoldModel::new(vec![outer, inner], vec![1.0 - w_in, w_in])
}
