//! Smallest eigenpairs of graph Laplacians, embeddings, alignment with
//! analytic eigenfunctions, clustering and out-of-sample extension.

mod align;
mod cluster;
mod extend;
mod lobpcg;

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::graph::{LaplacianMatrix, Normalization};
use crate::manifolds::PointCloud;

pub use align::{align_to_reference, Alignment};
pub use cluster::{clustering_accuracy, hungarian_max, kmeans, spectral_cluster, Clustering};
pub use extend::{extend, extend_sample};

/// Relative eigengap below which eigenvalues share a cluster.
pub const GAP_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct EigenOptions {
    /// Absolute residual tolerance `|L u - lambda u| / |u|`.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Block size; defaults to `max(2 S, 8)`.
    pub block: Option<usize>,
    /// Diagonal (degree) preconditioning.
    pub jacobi: bool,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-8,
            max_iter: 5000,
            seed: 0,
            block: None,
            jacobi: true,
        }
    }
}

/// Smallest eigenpairs with eigenvectors scaled to unit `L^2(pi_n)` norm,
/// `(1/n) sum U_i^2 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSystem {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    /// `n x S`, one eigenvector per column.
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    /// Eigengap cluster id per eigenvalue.
    pub clusters: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub norm: Normalization,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }
}

/// Group ascending values whose consecutive gap is at most
/// `GAP_TOL * max(1, |value|)`.
pub fn eigengap_clusters(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        let id = match i {
            0 => 0,
            _ if (v - values[i - 1]).abs() <= GAP_TOL * v.abs().max(1.0) => out[i - 1],
            _ => out[i - 1] + 1,
        };
        out.push(id);
    }
    out
}

/// First `s` eigenpairs of `lap`. Small matrices (fewer than `3 block + 1`
/// rows) are solved densely; everything else goes through the block solver.
pub fn smallest_eigenpairs(lap: &LaplacianMatrix, s: usize, opts: &EigenOptions) -> Result<EigenSystem> {
    let n = lap.n();
    if s == 0 || s > n {
        return Err(config(format!("requested {s} eigenpairs of a {n} x {n} matrix")));
    }
    if !(opts.tol > 0.0) {
        return Err(config("eigen tolerance must be positive"));
    }
    let block = opts.block.unwrap_or((2 * s).max(8));
    let raw = if n < 3 * block + 1 {
        lobpcg::dense_smallest(lap, s)
    } else {
        lobpcg::lobpcg(lap, s, block, opts.tol, opts.max_iter, opts.seed, opts.jacobi)
    };
    let mut vectors = raw.vectors;
    lobpcg::fix_signs(&mut vectors);
    let scale = (n as f64).sqrt();
    for mut c in vectors.column_iter_mut() {
        let norm = c.norm();
        c *= scale / norm;
    }
    let normalized: Vec<f64> = raw.values.iter().map(|&v| lap.norm.eigenvalue(v)).collect();
    let sys = EigenSystem {
        clusters: eigengap_clusters(&normalized),
        normalized,
        raw: raw.values,
        vectors,
        residuals: raw.residuals,
        iterations: raw.iterations,
        converged: raw.converged,
        norm: lap.norm.clone(),
    };
    if !sys.converged {
        let max_residual = sys.residuals.iter().cloned().fold(0.0, f64::max);
        return Err(Error::NoConvergence {
            iterations: sys.iterations,
            max_residual,
            partial: Box::new(sys),
        });
    }
    Ok(sys)
}

/// `sqrt((1/n) sum (u_i - theta_i)^2)`.
pub fn empirical_error(u: &[f64], theta: &[f64]) -> Result<f64> {
    if u.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: theta.len(),
        });
    }
    if u.is_empty() {
        return Ok(0.0);
    }
    let ss: f64 = u.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / u.len() as f64).sqrt())
}

/// Which Laplacian produced an embedding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Radius-graph Laplacian.
    Cml,
    /// Augmentation-averaged Laplacian.
    Aiml,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Cml => "cml",
            Method::Aiml => "aiml",
        }
    }
}

/// Representation values at the training samples, one column per
/// eigenvector.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    pub values: DMatrix<f64>,
    pub method: Method,
    pub r: f64,
    pub cloud: PointCloud,
}

impl EmbeddingMatrix {
    pub fn new(eig: &EigenSystem, method: Method, r: f64, cloud: &PointCloud) -> Self {
        EmbeddingMatrix {
            values: eig.vectors.clone(),
            method,
            r,
            cloud: cloud.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }
}

/// Columns `index, true_k, coord_1..coord_S` with 1-based `true_k`.
pub fn write_embedding_csv<W: Write>(emb: &EmbeddingMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string(), "true_k".to_string()];
    header.extend((1..=emb.dim()).map(|i| format!("coord_{i}")));
    w.write_record(&header)?;
    for (i, s) in emb.cloud.samples.iter().enumerate() {
        let mut row = vec![i.to_string(), (s.k + 1).to_string()];
        row.extend(emb.values.row(i).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `s, raw, normalized, residual` with 1-based `s`.
pub fn write_eigenvalues_csv<W: Write>(eig: &EigenSystem, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "raw", "normalized", "residual"])?;
    for i in 0..eig.len() {
        w.write_record([
            (i + 1).to_string(),
            eig.raw[i].to_string(),
            eig.normalized[i].to_string(),
            eig.residuals[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
