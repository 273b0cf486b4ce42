//! Radius neighborhood graphs, unnormalized graph Laplacians, discrete
//! Dirichlet energies and connected components.

mod energy;
mod index;
mod kernel;

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{config, Result};
use crate::manifolds::PointCloud;
use crate::sparse::SymCsr;

pub use energy::{dirichlet, dirichlet_split, DirichletSplit};
pub use index::{dist2, radius_pairs, CellGrid};
pub use kernel::{gamma_half, surface_tension, unit_ball_volume, KernelProfile};

/// Weighted radius graph on `n` points.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborGraph {
    pub r: f64,
    pub kernel: KernelProfile,
    /// Intrinsic dimension used when normalizing energies.
    pub dim: usize,
    pub weights: SymCsr,
}

impl NeighborGraph {
    pub fn n(&self) -> usize {
        self.weights.n()
    }

    pub fn edge_count(&self) -> usize {
        self.weights.nnz() / 2
    }
}

/// Graph on a sampled cloud with weights `h(|X_i - X_j| / r)`.
pub fn build_graph(cloud: &PointCloud, r: f64, kernel: KernelProfile) -> Result<NeighborGraph> {
    let pts: Vec<Vec<f64>> = cloud.samples.iter().map(|s| s.x.clone()).collect();
    build_graph_points(&pts, r, kernel, cloud.model.dim())
}

pub fn build_graph_points(
    points: &[Vec<f64>],
    r: f64,
    kernel: KernelProfile,
    dim: usize,
) -> Result<NeighborGraph> {
    if points.is_empty() {
        return Err(config("cannot build a graph on zero points"));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(config(format!("radius must be positive, got {r}")));
    }
    let pairs = radius_pairs(points, r);
    let mut triplets = Vec::new();
    for (i, row) in pairs.into_iter().enumerate() {
        for (j, d) in row {
            triplets.push((i, j, kernel.eval(d / r)));
        }
    }
    Ok(NeighborGraph {
        r,
        kernel,
        dim,
        weights: SymCsr::from_upper_triplets(points.len(), &triplets),
    })
}

/// Constants turning quadratic forms into Dirichlet energies and raw
/// eigenvalues into values comparable with the limiting operator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Normalization {
    pub sigma: f64,
    pub n: usize,
    pub r: f64,
    /// Exponent `d` in the `r^(d+2)` scaling.
    pub dim: usize,
    /// Extra factor applied to normalized eigenvalues (1 for radius graphs).
    pub eigen_scale: f64,
}

impl Normalization {
    /// Factor `2 / (sigma n^2 r^(d+2))` mapping `U^T L U` to `b(U)`.
    pub fn energy_factor(&self) -> f64 {
        2.0 / (self.sigma * (self.n as f64).powi(2) * self.r.powi(self.dim as i32 + 2))
    }

    /// Raw eigenvalue of `L` to the scale of the limiting operator.
    pub fn eigenvalue(&self, raw: f64) -> f64 {
        self.eigen_scale * raw * self.energy_factor() * self.n as f64
    }

    pub fn with_dim(&self, dim: usize) -> Self {
        Normalization { dim, ..self.clone() }
    }
}

/// `L = D - W` stored as the weight matrix plus degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianMatrix {
    pub weights: SymCsr,
    pub degree: Vec<f64>,
    pub norm: Normalization,
}

impl LaplacianMatrix {
    pub fn from_weights(weights: SymCsr, norm: Normalization) -> Self {
        let degree = weights.row_sums();
        LaplacianMatrix {
            weights,
            degree,
            norm,
        }
    }

    pub fn n(&self) -> usize {
        self.degree.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n() {
            let (cols, vals) = self.weights.row(i);
            let mut acc = self.degree[i] * x[i];
            for (&j, &w) in cols.iter().zip(vals) {
                acc -= w * x[j];
            }
            y[i] = acc;
        }
    }

    /// `L X` for a block of column vectors.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(x.nrows(), x.ncols());
        for c in 0..x.ncols() {
            let xc = x.column(c);
            let mut yc = y.column_mut(c);
            let xs = xc.as_slice();
            self.matvec(xs, yc.as_mut_slice());
        }
        y
    }

    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        let mut y = vec![0.0; u.len()];
        self.matvec(u, &mut y);
        u.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.degree[i];
            let (cols, vals) = self.weights.row(i);
            for (&j, &w) in cols.iter().zip(vals) {
                m[(i, j)] = -w;
            }
        }
        m
    }
}

pub fn laplacian(graph: &NeighborGraph) -> LaplacianMatrix {
    let norm = Normalization {
        sigma: graph.kernel.surface_tension(graph.dim.max(1)),
        n: graph.n(),
        r: graph.r,
        dim: graph.dim,
        eigen_scale: 1.0,
    };
    LaplacianMatrix::from_weights(graph.weights.clone(), norm)
}

/// Component labels numbered in order of first appearance.
pub fn connected_components(weights: &SymCsr) -> Vec<usize> {
    let n = weights.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, j, w) in weights.upper_triplets() {
        if w > 0.0 {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if label[root] == usize::MAX {
            label[root] = next;
            next += 1;
        }
        out[i] = label[root];
    }
    out
}

pub fn component_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

/// Triplet CSV `i, j, w` (upper triangle, 0-based indices), with an
/// optional constant `mode` column.
pub fn write_triplets_csv<W: Write>(weights: &SymCsr, mode: Option<&str>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match mode {
        Some(_) => w.write_record(["i", "j", "w", "mode"])?,
        None => w.write_record(["i", "j", "w"])?,
    }
    for (i, j, v) in weights.upper_triplets() {
        let mut row = vec![i.to_string(), j.to_string(), v.to_string()];
        if let Some(m) = mode {
            row.push(m.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
