//! Discrete Dirichlet energies and their within/cross decomposition.

use super::LaplacianMatrix;
use crate::error::{Error, Result};

/// `b(U) = sum over ordered pairs W_ij (U_i - U_j)^2 / (sigma n^2 r^(d+2))`,
/// accumulated edge by edge.
pub fn dirichlet(lap: &LaplacianMatrix, u: &[f64]) -> Result<f64> {
    check_len(lap, u.len())?;
    let edge: f64 = lap
        .weights
        .upper_triplets()
        .map(|(i, j, w)| w * (u[i] - u[j]).powi(2))
        .sum();
    Ok(edge * lap.norm.energy_factor())
}

/// Energy split into within-component part `b_W = sum (n_k/n)^2 b_k`, cross
/// part `b_C` and per-component energies `b_k` (normalized by `n_k^2`).
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletSplit {
    pub within: f64,
    pub cross: f64,
    pub per_component: Vec<f64>,
}

pub fn dirichlet_split(lap: &LaplacianMatrix, labels: &[usize], u: &[f64]) -> Result<DirichletSplit> {
    check_len(lap, u.len())?;
    check_len(lap, labels.len())?;
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    let mut within_sums = vec![0.0; k];
    let mut cross = 0.0;
    for (i, j, w) in lap.weights.upper_triplets() {
        let e = w * (u[i] - u[j]).powi(2);
        if labels[i] == labels[j] {
            within_sums[labels[i]] += e;
        } else {
            cross += e;
        }
    }
    let f = lap.norm.energy_factor();
    let n = lap.n() as f64;
    let per_component: Vec<f64> = within_sums
        .iter()
        .zip(&counts)
        .map(|(s, &nk)| {
            if nk == 0 {
                0.0
            } else {
                s * f * (n / nk as f64).powi(2)
            }
        })
        .collect();
    let within = per_component
        .iter()
        .zip(&counts)
        .map(|(b, &nk)| (nk as f64 / n).powi(2) * b)
        .sum();
    Ok(DirichletSplit {
        within,
        cross: cross * f,
        per_component,
    })
}

fn check_len(lap: &LaplacianMatrix, got: usize) -> Result<()> {
    if got != lap.n() {
        return Err(Error::DimensionMismatch {
            expected: lap.n(),
            got,
        });
    }
    Ok(())
}
