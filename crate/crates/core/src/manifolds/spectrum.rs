//! Closed-form spectra of the mixture-weighted Laplace-Beltrami operators.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::{AxisKind, LatentAxis, MultiManifoldModel, Sample};
use crate::error::{config, Error, Result};

/// Which limiting operator a spectrum belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    /// Full manifold operator, acting on signal and nuisance coordinates.
    Manifold,
    /// Signal-only operator, scaled by the inverse fiber volume.
    Signal,
}

/// Eigenfunction supported on one component: a tensor product of 1D
/// Laplacian modes in the latent coordinates, scaled to unit `L^2(pi)` norm.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticEigenfunction {
    pub eigenvalue: f64,
    pub component: usize,
    /// Mode index per latent axis. Periodic axes use 0, cos 1, sin 1, cos 2,
    /// sin 2, ...; interval axes use cos(pi j u) for j = 0, 1, ...
    pub mode: Vec<usize>,
    pub group: usize,
    pub operator: Operator,
    axes: Vec<LatentAxis>,
    scale: f64,
}

impl AnalyticEigenfunction {
    pub fn eval(&self, s: &Sample) -> f64 {
        if s.k != self.component {
            return 0.0;
        }
        self.eval_latent(&s.phi, &s.psi)
    }

    /// Value from latent coordinates alone, ignoring the component label.
    pub fn eval_latent(&self, phi: &[f64], psi: &[f64]) -> f64 {
        let coords = phi.iter().chain(psi.iter());
        self.scale
            * self
                .axes
                .iter()
                .zip(coords)
                .zip(&self.mode)
                .map(|((axis, &c), &m)| mode_value(axis, m, c))
                .product::<f64>()
    }
}

fn mode_value(axis: &LatentAxis, m: usize, c: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let u = axis.normalized(c);
    match axis.kind {
        AxisKind::Periodic => {
            let j = m.div_ceil(2) as f64;
            if m % 2 == 1 {
                SQRT_2 * (2.0 * PI * j * u).cos()
            } else {
                SQRT_2 * (2.0 * PI * j * u).sin()
            }
        }
        AxisKind::Interval => SQRT_2 * (PI * m as f64 * u).cos(),
    }
}

fn mode_eigenvalue(axis: &LatentAxis, m: usize) -> f64 {
    let freq = match axis.kind {
        AxisKind::Periodic => 2.0 * PI * m.div_ceil(2) as f64,
        AxisKind::Interval => PI * m as f64,
    };
    (freq / axis.metric_len).powi(2)
}

struct Candidate {
    eigenvalue: f64,
    component: usize,
    mode: Vec<usize>,
}

fn order(a: &Candidate, b: &Candidate) -> Ordering {
    a.eigenvalue
        .total_cmp(&b.eigenvalue)
        .then(a.component.cmp(&b.component))
        .then(a.mode.cmp(&b.mode))
}

#[derive(PartialEq, PartialOrd)]
struct Key(f64, Vec<usize>);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Smallest `count` tensor modes by eigenvalue, found best-first.
fn smallest_modes(axes: &[LatentAxis], scale: f64, count: usize) -> Vec<(f64, Vec<usize>)> {
    let value = |m: &[usize]| -> f64 {
        scale
            * axes
                .iter()
                .zip(m)
                .map(|(a, &i)| mode_eigenvalue(a, i))
                .sum::<f64>()
    };
    let mut frontier = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let start = vec![0; axes.len()];
    frontier.insert(Key(value(&start), start.clone()));
    seen.insert(start);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let Some(Key(v, m)) = frontier.pop_first() else {
            break;
        };
        for a in 0..m.len() {
            let mut next = m.clone();
            next[a] += 1;
            if seen.insert(next.clone()) {
                frontier.insert(Key(value(&next), next));
            }
        }
        out.push((v, m));
    }
    out
}

/// First `count` eigenpairs of the chosen operator, ascending, with ties
/// ordered by component and mode index. Requires uniform densities and
/// components built from circles and (periodic) flat cubes.
pub fn analytic_spectrum(
    model: &MultiManifoldModel,
    operator: Operator,
    count: usize,
) -> Result<Vec<AnalyticEigenfunction>> {
    model.validate()?;
    let mut candidates = Vec::new();
    let mut axes_by_component = Vec::new();
    for (k, c) in model.components.iter().enumerate() {
        let w = model.weights[k];
        if w <= 0.0 {
            return Err(config("closed-form spectrum needs positive weights"));
        }
        if !c.signal_density().is_uniform() {
            return Err(Error::Unsupported(
                "closed-form spectrum needs uniform densities; use the numeric eigensolver".into(),
            ));
        }
        let mut axes = c.signal_axes().map_err(|_| {
            Error::Unsupported(format!(
                "no closed-form spectrum for {}; use the numeric eigensolver",
                c.kind_name()
            ))
        })?;
        if operator == Operator::Manifold {
            axes.extend(c.nuisance_axes()?);
        }
        let scale = w / c.geometry().volume;
        for (v, mode) in smallest_modes(&axes, scale, count) {
            candidates.push(Candidate {
                eigenvalue: v,
                component: k,
                mode,
            });
        }
        axes_by_component.push(axes);
    }
    candidates.sort_by(order);
    candidates.truncate(count);
    let mut out: Vec<AnalyticEigenfunction> = Vec::with_capacity(candidates.len());
    for c in candidates {
        let group = match out.last() {
            None => 0,
            Some(p) if (c.eigenvalue - p.eigenvalue).abs() <= 1e-9 * p.eigenvalue.max(1.0) => {
                p.group
            }
            Some(p) => p.group + 1,
        };
        out.push(AnalyticEigenfunction {
            eigenvalue: c.eigenvalue,
            component: c.component,
            mode: c.mode,
            group,
            operator,
            axes: axes_by_component[c.component].clone(),
            scale: 1.0 / model.weights[c.component].sqrt(),
        });
    }
    Ok(out)
}
