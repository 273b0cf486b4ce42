//! Checks of the kernel-radius and sample-size regime for a model.

use serde::Serialize;

use super::{min_separation, MultiManifoldModel};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeReport {
    /// `min{1, i0, curvature^(-1/2), reach/2}`; the radius must satisfy
    /// `2r` strictly below it.
    pub radius_cap: f64,
    pub radius_ok: bool,
    /// `r / (ln n / n)^(1/d)`.
    pub scale_ratio: f64,
    /// `r / (ln n / n)^(1/d_s)`.
    pub signal_scale_ratio: f64,
    /// `None` when no closed form exists for the construction.
    pub separation: Option<f64>,
    pub separated: Option<bool>,
    pub density_bound: f64,
}

pub fn validate_regime(model: &MultiManifoldModel, r: f64, n: usize) -> RegimeReport {
    let g = model.geometry();
    let curvature_cap = if g.curvature > 0.0 {
        g.curvature.powf(-0.5)
    } else {
        f64::INFINITY
    };
    let radius_cap = 1f64
        .min(g.injectivity)
        .min(curvature_cap)
        .min(g.reach / 2.0);
    let base = (n as f64).ln() / n as f64;
    let separation = min_separation(model).ok();
    RegimeReport {
        radius_cap,
        radius_ok: 2.0 * r < radius_cap,
        scale_ratio: r / base.powf(1.0 / model.dim() as f64),
        signal_scale_ratio: r / base.powf(1.0 / model.signal_dim() as f64),
        separation,
        separated: separation.map(|d| d > r),
        density_bound: model.density_bound(),
    }
}
