//! Minimum-norm hard-margin solution `min |beta|^2 s.t. y_i beta^T x_i >= 1`.

use nalgebra::{DMatrix, DVector};

use super::LabeledSet;

#[derive(Clone, Debug, PartialEq)]
pub enum MarginSolution {
    Feasible(Vec<f64>),
    Infeasible,
}

impl MarginSolution {
    pub fn beta(&self) -> Option<&[f64]> {
        match self {
            MarginSolution::Feasible(b) => Some(b),
            MarginSolution::Infeasible => None,
        }
    }
}

const FEAS_TOL: f64 = 1e-9;

fn signed(data: &LabeledSet) -> Vec<Vec<f64>> {
    data.features
        .iter()
        .zip(&data.labels)
        .map(|(x, y)| x.iter().map(|v| v * y).collect())
        .collect()
}

fn feasible(z: &[Vec<f64>], beta: &[f64]) -> bool {
    z.iter()
        .all(|zi| zi.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() >= 1.0 - FEAS_TOL)
}

/// Exact solution by enumerating candidate support sets (for `m <= 20`)
/// and dual coordinate ascent otherwise.
pub fn max_margin_oracle(data: &LabeledSet) -> MarginSolution {
    if data.m() <= 20 {
        max_margin_enumerate(data)
    } else {
        max_margin_dual(data)
    }
}

/// Every linearly independent support set of size at most `S` is tried:
/// solve `G alpha = 1` on it, keep solutions with `alpha >= 0` that satisfy
/// all constraints, and return the smallest norm.
pub(crate) fn max_margin_enumerate(data: &LabeledSet) -> MarginSolution {
    let z = signed(data);
    let (m, s) = (data.m(), data.dim());
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut subset = Vec::new();
    fn visit(
        start: usize,
        subset: &mut Vec<usize>,
        z: &[Vec<f64>],
        m: usize,
        s: usize,
        best: &mut Option<(f64, Vec<f64>)>,
    ) {
        if !subset.is_empty() {
            if let Some(beta) = support_solution(z, subset) {
                let norm: f64 = beta.iter().map(|v| v * v).sum();
                if feasible(z, &beta) && best.as_ref().is_none_or(|b| norm < b.0) {
                    *best = Some((norm, beta));
                }
            }
        }
        if subset.len() == s {
            return;
        }
        for i in start..m {
            subset.push(i);
            visit(i + 1, subset, z, m, s, best);
            subset.pop();
        }
    }
    visit(0, &mut subset, &z, m, s, &mut best);
    match best {
        Some((_, beta)) => MarginSolution::Feasible(beta),
        None => MarginSolution::Infeasible,
    }
}

fn support_solution(z: &[Vec<f64>], subset: &[usize]) -> Option<Vec<f64>> {
    let k = subset.len();
    let g = DMatrix::from_fn(k, k, |a, b| {
        z[subset[a]].iter().zip(&z[subset[b]]).map(|(p, q)| p * q).sum()
    });
    let eig = g.clone().symmetric_eigenvalues();
    let top = eig.iter().cloned().fold(0.0, f64::max);
    if eig.iter().cloned().fold(f64::INFINITY, f64::min) <= 1e-12 * top.max(1e-300) {
        return None;
    }
    let alpha = g.cholesky()?.solve(&DVector::from_element(k, 1.0));
    if alpha.iter().any(|a| *a < -1e-12) {
        return None;
    }
    let s = z[0].len();
    let mut beta = vec![0.0; s];
    for (a, &i) in alpha.iter().zip(subset) {
        for (b, v) in beta.iter_mut().zip(&z[i]) {
            *b += a * v;
        }
    }
    Some(beta)
}

/// Dual coordinate ascent on `max sum alpha - |sum alpha_i z_i|^2 / 2`,
/// `alpha >= 0`, followed by a rescaling that restores feasibility. An
/// unbounded dual (non-separable data) is reported as infeasible.
pub fn max_margin_dual(data: &LabeledSet) -> MarginSolution {
    let z = signed(data);
    let (m, s) = (data.m(), data.dim());
    let norms: Vec<f64> = z.iter().map(|v| v.iter().map(|a| a * a).sum()).collect();
    if norms.iter().any(|&v| v == 0.0) {
        return MarginSolution::Infeasible;
    }
    let mut alpha = vec![0.0; m];
    let mut beta = vec![0.0; s];
    for _sweep in 0..200_000 {
        let mut worst = 0.0f64;
        for i in 0..m {
            let margin: f64 = z[i].iter().zip(&beta).map(|(a, b)| a * b).sum();
            let grad = 1.0 - margin;
            let violation = if alpha[i] > 0.0 { grad.abs() } else { grad.max(0.0) };
            worst = worst.max(violation);
            let next = (alpha[i] + grad / norms[i]).max(0.0);
            let step = next - alpha[i];
            if step != 0.0 {
                alpha[i] = next;
                for (b, v) in beta.iter_mut().zip(&z[i]) {
                    *b += step * v;
                }
            }
        }
        if worst < 1e-12 {
            break;
        }
        if alpha.iter().sum::<f64>() > 1e12 {
            return MarginSolution::Infeasible;
        }
    }
    let min_margin = z
        .iter()
        .map(|zi| zi.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    if !(min_margin > 0.0) {
        return MarginSolution::Infeasible;
    }
    if min_margin < 1.0 {
        beta.iter_mut().for_each(|b| *b /= min_margin);
    }
    MarginSolution::Feasible(beta)
}

/// `1 / |beta*|`, or `None` when the data is not linearly separable.
pub fn separability_margin(data: &LabeledSet) -> Option<f64> {
    max_margin_oracle(data)
        .beta()
        .map(|b| 1.0 / b.iter().map(|v| v * v).sum::<f64>().sqrt())
}
