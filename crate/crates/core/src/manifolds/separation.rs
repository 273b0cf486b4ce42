//! Exact minimum distance between components.

use super::{cell_bounds, ManifoldSpec, MultiManifoldModel};
use crate::error::{Error, Result};

/// Smallest distance between two distinct components. A single component
/// reports 0.
pub fn min_separation(model: &MultiManifoldModel) -> Result<f64> {
    let c = &model.components;
    let mut best = f64::INFINITY;
    if c.len() == 1 {
        return Ok(0.0);
    }
    for a in 0..c.len() {
        for b in a + 1..c.len() {
            best = best.min(pair_distance(&c[a], &c[b])?);
        }
    }
    Ok(best)
}

fn pair_distance(a: &ManifoldSpec, b: &ManifoldSpec) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if let (
        ManifoldSpec::OffsetCopy { base: ba, offset: oa },
        ManifoldSpec::OffsetCopy { base: bb, offset: ob },
    ) = (a, b)
    {
        if ba == bb {
            return Ok((oa - ob).abs());
        }
    }
    if let (Some((ca, ra)), Some((cb, rb))) = (a.as_circle(), b.as_circle()) {
        return Ok(circle_distance(&ca, ra, &cb, rb));
    }
    if let (Some(ba), Some(bb)) = (a.as_box(), b.as_box()) {
        return Ok(box_distance(&ba, &bb));
    }
    for (outer, inner) in [(a, b), (b, a)] {
        if let (ManifoldSpec::CubeMinusCell { dim, grid, cell }, Some((lo, hi))) =
            (outer, inner.as_box())
        {
            let (clo, chi) = cell_bounds(*dim, *grid, *cell);
            let gap = (0..*dim)
                .map(|i| (lo[i] - clo[i]).min(chi[i] - hi[i]))
                .fold(f64::INFINITY, f64::min);
            return Ok(gap.max(0.0));
        }
    }
    Err(Error::Unsupported(format!(
        "no closed-form separation between {} and {}",
        a.kind_name(),
        b.kind_name()
    )))
}

/// Distance between two coplanar circles.
fn circle_distance(ca: &[f64], ra: f64, cb: &[f64], rb: f64) -> f64 {
    let d = ((ca[0] - cb[0]).powi(2) + (ca[1] - cb[1]).powi(2)).sqrt();
    if d >= ra + rb {
        d - ra - rb
    } else if d + ra.min(rb) <= ra.max(rb) {
        ra.max(rb) - d - ra.min(rb)
    } else {
        0.0
    }
}

fn box_distance(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> f64 {
    a.0.iter()
        .zip(&a.1)
        .zip(b.0.iter().zip(&b.1))
        .map(|((alo, ahi), (blo, bhi))| (blo - ahi).max(alo - bhi).max(0.0).powi(2))
        .sum::<f64>()
        .sqrt()
}
