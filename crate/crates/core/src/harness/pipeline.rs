//! Shared steps of every sweep cell: weights, eigenpairs, references.

use nalgebra::DMatrix;

use super::config::{MethodId, SolverSettings};
use crate::aiml::{aiml_laplacian, kernel_weights, mc_weights};
use crate::error::Result;
use crate::graph::{build_graph, component_count, connected_components, laplacian, KernelProfile, LaplacianMatrix};
use crate::manifolds::{analytic_spectrum, MultiManifoldModel, Operator, Sample};
use crate::rng::derive_seed;
use crate::spectral::{smallest_eigenpairs, EigenSystem, EmbeddingMatrix, Method};

pub struct Embedded {
    pub eig: EigenSystem,
    pub embedding: EmbeddingMatrix,
    pub components: usize,
}

pub fn operator_for(method: MethodId) -> Operator {
    if method.is_aiml() {
        Operator::Signal
    } else {
        Operator::Manifold
    }
}

fn spectral_method(method: MethodId) -> Method {
    if method.is_aiml() {
        Method::Aiml
    } else {
        Method::Cml
    }
}

pub fn build_laplacian(
    method: MethodId,
    cloud: &crate::manifolds::PointCloud,
    r: f64,
    solver: &SolverSettings,
    seed: u64,
) -> Result<LaplacianMatrix> {
    Ok(match method {
        MethodId::Cml => laplacian(&build_graph(cloud, r, KernelProfile::Indicator)?),
        MethodId::AimlKernel => aiml_laplacian(&kernel_weights(cloud, r)?, cloud.len()),
        MethodId::AimlMc => aiml_laplacian(
            &mc_weights(cloud, r, solver.n_aug, derive_seed(seed, "aiml-mc", 0))?,
            cloud.len(),
        ),
    })
}

pub fn embed(
    method: MethodId,
    cloud: &crate::manifolds::PointCloud,
    r: f64,
    s: usize,
    solver: &SolverSettings,
    seed: u64,
) -> Result<Embedded> {
    let lap = build_laplacian(method, cloud, r, solver, seed)?;
    let components = component_count(&connected_components(&lap.weights));
    let eig = smallest_eigenpairs(&lap, s.min(cloud.len()), &solver.eigen_options(derive_seed(seed, "eigen", 0)))?;
    let embedding = EmbeddingMatrix::new(&eig, spectral_method(method), r, cloud);
    Ok(Embedded {
        eig,
        embedding,
        components,
    })
}

/// Smallest count `>= s` that does not split a multiplicity group of the
/// closed-form spectrum.
pub fn complete_group_count(model: &MultiManifoldModel, op: Operator, s: usize) -> Result<usize> {
    let spec = analytic_spectrum(model, op, s + 8)?;
    let mut count = s;
    while count < spec.len() && spec[count].group == spec[count - 1].group {
        count += 1;
    }
    Ok(count)
}

/// Closed-form eigenfunctions at the samples, one column each, with their
/// group ids. Columns are rescaled to unit `L^2(pi_n)` norm, so exact
/// component indicators match the eigenvectors of a disconnected graph.
/// `latent_only` evaluates on latent coordinates regardless of the
/// component label (reference taken from a single-component model).
pub struct Reference {
    pub values: DMatrix<f64>,
    pub groups: Vec<usize>,
    pub eigenvalues: Vec<f64>,
}

pub fn reference(
    model: &MultiManifoldModel,
    op: Operator,
    s: usize,
    samples: &[Sample],
    latent_only: bool,
) -> Result<Reference> {
    let spec = analytic_spectrum(model, op, s)?;
    let mut values = DMatrix::from_fn(samples.len(), s, |i, c| {
        if latent_only {
            spec[c].eval_latent(&samples[i].phi, &samples[i].psi)
        } else {
            spec[c].eval(&samples[i])
        }
    });
    let n = samples.len() as f64;
    for mut col in values.column_iter_mut() {
        let norm = (col.norm_squared() / n).sqrt();
        if norm > 0.0 {
            col /= norm;
        }
    }
    Ok(Reference {
        values,
        groups: spec.iter().map(|e| e.group).collect(),
        eigenvalues: spec.iter().map(|e| e.eigenvalue).collect(),
    })
}
