//! Radial kernel profiles and their surface tension.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Radial profile `h` supported on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelProfile {
    Indicator,
    /// `h(t) = (1 - t^2)_+^(nuisance_dim / 2)`.
    AimlProfile { nuisance_dim: usize },
}

impl KernelProfile {
    pub fn eval(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        match *self {
            KernelProfile::Indicator | KernelProfile::AimlProfile { nuisance_dim: 0 } => 1.0,
            KernelProfile::AimlProfile { nuisance_dim } => {
                (1.0 - t * t).max(0.0).powf(nuisance_dim as f64 / 2.0)
            }
        }
    }

    pub fn id(&self) -> String {
        match self {
            KernelProfile::Indicator => "indicator".into(),
            KernelProfile::AimlProfile { nuisance_dim } => format!("aiml-profile({nuisance_dim})"),
        }
    }

    /// `integral of y_1^2 h(|y|) dy` over `R^d`.
    pub fn surface_tension(&self, d: usize) -> f64 {
        surface_tension(*self, d)
    }
}

/// Gamma function at `twice / 2` for a positive integer `twice`.
pub fn gamma_half(twice: u32) -> f64 {
    assert!(twice > 0, "gamma_half needs a positive argument");
    let mut g = if twice % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if twice % 2 == 0 { 1.0 } else { 0.5 };
    while (2.0 * x) < twice as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    PI.powf(d as f64 / 2.0) / gamma_half(d as u32 + 2)
}

/// Surface tension `V_d * integral_0^1 rho^(d+1) h(rho) d rho` in closed form.
pub fn surface_tension(kernel: KernelProfile, d: usize) -> f64 {
    assert!(d >= 1, "surface tension needs d >= 1");
    let vd = unit_ball_volume(d);
    match kernel {
        KernelProfile::Indicator | KernelProfile::AimlProfile { nuisance_dim: 0 } => {
            vd / (d as f64 + 2.0)
        }
        KernelProfile::AimlProfile { nuisance_dim } => {
            // integral = B(d/2 + 1, d_v/2 + 1) / 2
            let a = d as u32 + 2;
            let b = nuisance_dim as u32 + 2;
            let beta = gamma_half(a) * gamma_half(b) / gamma_half(a + b);
            vd * beta / 2.0
        }
    }
}
