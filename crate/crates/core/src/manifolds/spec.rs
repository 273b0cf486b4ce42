//! Single-component manifold descriptions and their closed-form geometry.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

/// Signal density on the signal factor, relative to the volume measure.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SignalDensity {
    #[default]
    Uniform,
    /// Density proportional to `1 + amplitude * cos(2 pi u)` along the first
    /// latent axis, `u` being the normalized coordinate in `[0, 1)`.
    Tilted { amplitude: f64 },
}

impl SignalDensity {
    pub fn is_uniform(&self) -> bool {
        matches!(self, SignalDensity::Uniform)
    }

    fn amplitude(&self) -> f64 {
        match self {
            SignalDensity::Uniform => 0.0,
            SignalDensity::Tilted { amplitude } => *amplitude,
        }
    }
}

/// One component manifold. Latent coordinates are angles for circles and
/// Euclidean coordinates for cubes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ManifoldSpec {
    /// Circle of the given radius centered at the origin of R^2.
    Circle {
        radius: f64,
        #[serde(default)]
        density: SignalDensity,
    },
    /// Axis-aligned box. With `periodic` each axis is closed into a circle
    /// of circumference equal to its side (Clifford embedding in R^{2d}).
    FlatCube {
        sides: Vec<f64>,
        #[serde(default)]
        lower: Option<Vec<f64>>,
        #[serde(default)]
        periodic: bool,
        #[serde(default)]
        density: SignalDensity,
    },
    /// Isometric product embedded block-diagonally: signal axes first.
    Product {
        signal: Box<ManifoldSpec>,
        nuisance: Box<ManifoldSpec>,
    },
    /// Base manifold with one fresh ambient axis appended at `offset`.
    OffsetCopy { base: Box<ManifoldSpec>, offset: f64 },
    /// Base manifold translated by `shift` in its ambient space.
    Translated {
        base: Box<ManifoldSpec>,
        shift: Vec<f64>,
    },
    /// Unit cube `[0,1]^dim` with the grid cell `cell` (1-based, row-major
    /// with the first axis slowest) of a `grid^dim` partition removed.
    CubeMinusCell { dim: usize, grid: usize, cell: usize },
}

/// Kind of a latent coordinate axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisKind {
    Periodic,
    Interval,
}

/// One latent coordinate: its range `[lower, lower + coord_len)` and the
/// geodesic length that range covers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentAxis {
    pub kind: AxisKind,
    pub lower: f64,
    pub coord_len: f64,
    pub metric_len: f64,
}

impl LatentAxis {
    /// Geodesic displacement between two coordinates along this axis.
    pub fn distance(&self, a: f64, b: f64) -> f64 {
        let mut t = (a - b).abs();
        if self.kind == AxisKind::Periodic {
            t %= self.coord_len;
            t = t.min(self.coord_len - t);
        }
        t * self.metric_len / self.coord_len
    }

    /// Coordinate mapped to `[0, 1)` (periodic) or `[0, 1]` (interval).
    pub fn normalized(&self, a: f64) -> f64 {
        let u = (a - self.lower) / self.coord_len;
        match self.kind {
            AxisKind::Periodic => u.rem_euclid(1.0),
            AxisKind::Interval => u,
        }
    }
}

/// Closed-form geometric constants. Intrinsically flat pieces report
/// `curvature = 0` and convex flat pieces report infinite reach and
/// injectivity radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricConstants {
    pub reach: f64,
    pub injectivity: f64,
    pub curvature: f64,
    pub volume: f64,
}

impl ManifoldSpec {
    pub fn circle(radius: f64) -> Self {
        ManifoldSpec::Circle {
            radius,
            density: SignalDensity::Uniform,
        }
    }

    pub fn cube(sides: Vec<f64>) -> Self {
        ManifoldSpec::FlatCube {
            sides,
            lower: None,
            periodic: false,
            density: SignalDensity::Uniform,
        }
    }

    pub fn torus(sides: Vec<f64>) -> Self {
        ManifoldSpec::FlatCube {
            sides,
            lower: None,
            periodic: true,
            density: SignalDensity::Uniform,
        }
    }

    pub fn product(signal: ManifoldSpec, nuisance: ManifoldSpec) -> Self {
        ManifoldSpec::Product {
            signal: Box::new(signal),
            nuisance: Box::new(nuisance),
        }
    }

    pub fn translated(self, shift: Vec<f64>) -> Self {
        ManifoldSpec::Translated {
            base: Box::new(self),
            shift,
        }
    }

    pub fn offset_copy(self, offset: f64) -> Self {
        ManifoldSpec::OffsetCopy {
            base: Box::new(self),
            offset,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ManifoldSpec::Circle { radius, density } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(config(format!("circle radius must be positive, got {radius}")));
                }
                validate_density(density)
            }
            ManifoldSpec::FlatCube {
                sides,
                lower,
                density,
                ..
            } => {
                if sides.is_empty() {
                    return Err(config("flat cube needs at least one side"));
                }
                if sides.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                    return Err(config("flat cube sides must be positive"));
                }
                if let Some(lo) = lower {
                    if lo.len() != sides.len() || lo.iter().any(|v| !v.is_finite()) {
                        return Err(config("flat cube lower corner must match its dimension"));
                    }
                }
                validate_density(density)
            }
            ManifoldSpec::Product { signal, nuisance } => {
                signal.validate()?;
                nuisance.validate()?;
                if !nuisance.signal_density().is_uniform() {
                    return Err(config("nuisance factor must carry the uniform density"));
                }
                if nuisance.nuisance_dim() > 0 || signal.nuisance_dim() > 0 {
                    return Err(config("product factors must not be products themselves"));
                }
                Ok(())
            }
            ManifoldSpec::OffsetCopy { base, offset } => {
                if !offset.is_finite() {
                    return Err(config("offset must be finite"));
                }
                base.validate()
            }
            ManifoldSpec::Translated { base, shift } => {
                base.validate()?;
                if shift.len() != base.ambient_dim() || shift.iter().any(|v| !v.is_finite()) {
                    return Err(Error::DimensionMismatch {
                        expected: base.ambient_dim(),
                        got: shift.len(),
                    });
                }
                Ok(())
            }
            ManifoldSpec::CubeMinusCell { dim, grid, cell } => {
                if *dim == 0 || *dim > 8 {
                    return Err(config("cube-minus-cell dimension must be in 1..=8"));
                }
                if *grid < 2 {
                    return Err(config("cube-minus-cell grid count must be at least 2"));
                }
                let cells = grid.pow(*dim as u32);
                if *cell == 0 || *cell > cells {
                    return Err(config(format!("cell index {cell} outside 1..={cells}")));
                }
                Ok(())
            }
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldSpec::Circle { .. } => 2,
            ManifoldSpec::FlatCube {
                sides, periodic, ..
            } => sides.len() * if *periodic { 2 } else { 1 },
            ManifoldSpec::Product { signal, nuisance } => {
                signal.ambient_dim() + nuisance.ambient_dim()
            }
            ManifoldSpec::OffsetCopy { base, .. } => base.ambient_dim() + 1,
            ManifoldSpec::Translated { base, .. } => base.ambient_dim(),
            ManifoldSpec::CubeMinusCell { dim, .. } => *dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.signal_dim() + self.nuisance_dim()
    }

    pub fn signal_dim(&self) -> usize {
        match self {
            ManifoldSpec::Circle { .. } => 1,
            ManifoldSpec::FlatCube { sides, .. } => sides.len(),
            ManifoldSpec::Product { signal, .. } => signal.dim(),
            ManifoldSpec::OffsetCopy { base, .. } | ManifoldSpec::Translated { base, .. } => {
                base.signal_dim()
            }
            ManifoldSpec::CubeMinusCell { dim, .. } => *dim,
        }
    }

    pub fn nuisance_dim(&self) -> usize {
        match self {
            ManifoldSpec::Product { nuisance, .. } => nuisance.dim(),
            ManifoldSpec::OffsetCopy { base, .. } | ManifoldSpec::Translated { base, .. } => {
                base.nuisance_dim()
            }
            _ => 0,
        }
    }

    /// Signal factor (the whole manifold for non-products).
    pub fn signal_part(&self) -> &ManifoldSpec {
        match self {
            ManifoldSpec::Product { signal, .. } => signal,
            ManifoldSpec::OffsetCopy { base, .. } | ManifoldSpec::Translated { base, .. } => {
                base.signal_part()
            }
            _ => self,
        }
    }

    pub fn nuisance_part(&self) -> Option<&ManifoldSpec> {
        match self {
            ManifoldSpec::Product { nuisance, .. } => Some(nuisance),
            ManifoldSpec::OffsetCopy { base, .. } | ManifoldSpec::Translated { base, .. } => {
                base.nuisance_part()
            }
            _ => None,
        }
    }

    pub fn signal_density(&self) -> &SignalDensity {
        const UNIFORM: SignalDensity = SignalDensity::Uniform;
        match self.signal_part() {
            ManifoldSpec::Circle { density, .. } | ManifoldSpec::FlatCube { density, .. } => {
                density
            }
            _ => &UNIFORM,
        }
    }

    /// Latent axes of a leaf manifold, or the concatenated signal axes.
    pub fn signal_axes(&self) -> Result<Vec<LatentAxis>> {
        match self.signal_part() {
            ManifoldSpec::Circle { radius, .. } => Ok(vec![LatentAxis {
                kind: AxisKind::Periodic,
                lower: 0.0,
                coord_len: 2.0 * PI,
                metric_len: 2.0 * PI * radius,
            }]),
            ManifoldSpec::FlatCube {
                sides,
                lower,
                periodic,
                ..
            } => Ok(sides
                .iter()
                .enumerate()
                .map(|(i, &s)| LatentAxis {
                    kind: if *periodic {
                        AxisKind::Periodic
                    } else {
                        AxisKind::Interval
                    },
                    lower: lower.as_ref().map_or(0.0, |l| l[i]),
                    coord_len: s,
                    metric_len: s,
                })
                .collect()),
            other => Err(Error::Unsupported(format!(
                "no product-of-axes coordinates for {}",
                other.kind_name()
            ))),
        }
    }

    pub fn nuisance_axes(&self) -> Result<Vec<LatentAxis>> {
        match self.nuisance_part() {
            Some(v) => v.signal_axes(),
            None => Ok(Vec::new()),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ManifoldSpec::Circle { .. } => "circle",
            ManifoldSpec::FlatCube { .. } => "flat-cube",
            ManifoldSpec::Product { .. } => "product",
            ManifoldSpec::OffsetCopy { .. } => "offset-copy",
            ManifoldSpec::Translated { .. } => "translated",
            ManifoldSpec::CubeMinusCell { .. } => "cube-minus-cell",
        }
    }

    /// Embedding of latent coordinates into the ambient space.
    pub fn embed(&self, phi: &[f64], psi: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.ambient_dim());
        self.embed_into(phi, psi, &mut out);
        out
    }

    fn embed_into(&self, phi: &[f64], psi: &[f64], out: &mut Vec<f64>) {
        match self {
            ManifoldSpec::Circle { radius, .. } => {
                out.push(radius * phi[0].cos());
                out.push(radius * phi[0].sin());
            }
            ManifoldSpec::FlatCube {
                sides,
                lower,
                periodic,
                ..
            } => {
                if *periodic {
                    for (i, &s) in sides.iter().enumerate() {
                        let lo = lower.as_ref().map_or(0.0, |l| l[i]);
                        let rho = s / (2.0 * PI);
                        let a = 2.0 * PI * (phi[i] - lo) / s;
                        out.push(rho * a.cos());
                        out.push(rho * a.sin());
                    }
                } else {
                    out.extend_from_slice(&phi[..sides.len()]);
                }
            }
            ManifoldSpec::Product { signal, nuisance } => {
                signal.embed_into(phi, &[], out);
                nuisance.embed_into(psi, &[], out);
            }
            ManifoldSpec::OffsetCopy { base, offset } => {
                base.embed_into(phi, psi, out);
                out.push(*offset);
            }
            ManifoldSpec::Translated { base, shift } => {
                let start = out.len();
                base.embed_into(phi, psi, out);
                for (o, s) in out[start..].iter_mut().zip(shift) {
                    *o += s;
                }
            }
            ManifoldSpec::CubeMinusCell { dim, .. } => out.extend_from_slice(&phi[..*dim]),
        }
    }

    /// Draw latent coordinates `(phi, psi)` from the signal density and the
    /// uniform nuisance density.
    pub fn sample_latent<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        match self {
            ManifoldSpec::Product { signal, nuisance } => {
                (signal.sample_latent(rng).0, nuisance.sample_latent(rng).0)
            }
            ManifoldSpec::OffsetCopy { base, .. } | ManifoldSpec::Translated { base, .. } => {
                base.sample_latent(rng)
            }
            ManifoldSpec::CubeMinusCell { dim, grid, cell } => {
                let (lo, hi) = cell_bounds(*dim, *grid, *cell);
                loop {
                    let p: Vec<f64> = (0..*dim).map(|_| rng.gen::<f64>()).collect();
                    let inside = p
                        .iter()
                        .zip(lo.iter().zip(&hi))
                        .all(|(x, (a, b))| *x > *a && *x < *b);
                    if !inside {
                        return (p, Vec::new());
                    }
                }
            }
            leaf => {
                let axes = leaf.signal_axes().expect("leaf axes");
                let amp = leaf.signal_density().amplitude();
                loop {
                    let u: Vec<f64> = axes.iter().map(|_| rng.gen::<f64>()).collect();
                    if amp > 0.0 {
                        let accept = (1.0 + amp * (2.0 * PI * u[0]).cos()) / (1.0 + amp);
                        if rng.gen::<f64>() >= accept {
                            continue;
                        }
                    }
                    let phi = axes
                        .iter()
                        .zip(&u)
                        .map(|(a, &t)| a.lower + t * a.coord_len)
                        .collect();
                    return (phi, Vec::new());
                }
            }
        }
    }

    /// Density of the signal coordinate relative to the signal volume
    /// measure, evaluated at normalized coordinate `u0` of the first axis.
    pub fn signal_density_at(&self, phi: &[f64]) -> f64 {
        let vol = self.signal_part().geometry().volume;
        let amp = self.signal_density().amplitude();
        if amp == 0.0 {
            return 1.0 / vol;
        }
        let axes = self.signal_axes().expect("tilted density needs axes");
        let u0 = axes[0].normalized(phi[0]);
        (1.0 + amp * (2.0 * PI * u0).cos()) / vol
    }

    /// Constant `C` with `1/C <= pi <= C` for the joint density of this
    /// component relative to its volume measure.
    pub fn density_bound(&self) -> f64 {
        let vol = self.geometry().volume;
        let amp = self.signal_density().amplitude();
        let hi = (1.0 + amp) / vol;
        let lo = (1.0 - amp) / vol;
        hi.max(1.0 / lo)
    }

    pub fn geometry(&self) -> GeometricConstants {
        match self {
            ManifoldSpec::Circle { radius, .. } => GeometricConstants {
                reach: *radius,
                injectivity: PI * radius,
                curvature: 0.0,
                volume: 2.0 * PI * radius,
            },
            ManifoldSpec::FlatCube {
                sides, periodic, ..
            } => {
                let volume = sides.iter().product();
                if *periodic {
                    let min_side = sides.iter().cloned().fold(f64::INFINITY, f64::min);
                    GeometricConstants {
                        reach: min_side / (2.0 * PI),
                        injectivity: min_side / 2.0,
                        curvature: 0.0,
                        volume,
                    }
                } else {
                    GeometricConstants {
                        reach: f64::INFINITY,
                        injectivity: f64::INFINITY,
                        curvature: 0.0,
                        volume,
                    }
                }
            }
            ManifoldSpec::Product { signal, nuisance } => {
                let (a, b) = (signal.geometry(), nuisance.geometry());
                GeometricConstants {
                    reach: a.reach.min(b.reach),
                    injectivity: a.injectivity.min(b.injectivity),
                    curvature: a.curvature.max(b.curvature),
                    volume: a.volume * b.volume,
                }
            }
            ManifoldSpec::OffsetCopy { base, .. } | ManifoldSpec::Translated { base, .. } => {
                base.geometry()
            }
            ManifoldSpec::CubeMinusCell { dim, grid, .. } => {
                let g = *grid as f64;
                // The removed cell leaves re-entrant corners for dim >= 2.
                let reach = if *dim == 1 { 0.5 / g } else { 0.0 };
                GeometricConstants {
                    reach,
                    injectivity: f64::INFINITY,
                    curvature: 0.0,
                    volume: 1.0 - g.powi(-(*dim as i32)),
                }
            }
        }
    }

    /// Extrinsic diameter of a single fiber (0 without nuisance factor).
    pub fn fiber_diameter(&self) -> f64 {
        match self.nuisance_part() {
            None => 0.0,
            Some(ManifoldSpec::Circle { radius, .. }) => 2.0 * radius,
            Some(ManifoldSpec::FlatCube {
                sides, periodic, ..
            }) => {
                if *periodic {
                    2.0 * sides
                        .iter()
                        .map(|s| (s / (2.0 * PI)).powi(2))
                        .sum::<f64>()
                        .sqrt()
                } else {
                    sides.iter().map(|s| s * s).sum::<f64>().sqrt()
                }
            }
            Some(other) => other.extrinsic_diameter_bound(),
        }
    }

    fn extrinsic_diameter_bound(&self) -> f64 {
        match self {
            ManifoldSpec::CubeMinusCell { dim, .. } => (*dim as f64).sqrt(),
            _ => f64::INFINITY,
        }
    }

    /// Ambient coordinates spanned by the nuisance factor.
    pub fn nuisance_mask(&self) -> Vec<bool> {
        match self {
            ManifoldSpec::Product { signal, nuisance } => {
                let mut m = vec![false; signal.ambient_dim()];
                m.extend(std::iter::repeat(true).take(nuisance.ambient_dim()));
                m
            }
            ManifoldSpec::OffsetCopy { base, .. } => {
                let mut m = base.nuisance_mask();
                m.push(false);
                m
            }
            ManifoldSpec::Translated { base, .. } => base.nuisance_mask(),
            other => vec![false; other.ambient_dim()],
        }
    }

    /// Ambient translation applied to the nuisance block, together with the
    /// nuisance factor, when the nuisance block is embedded at the origin
    /// up to that translation.
    pub fn nuisance_shift(&self) -> Vec<f64> {
        let mask = self.nuisance_mask();
        let mut shift = vec![0.0; mask.len()];
        self.accumulate_shift(&mut shift);
        shift
            .into_iter()
            .zip(mask)
            .filter(|(_, m)| *m)
            .map(|(s, _)| s)
            .collect()
    }

    fn accumulate_shift(&self, out: &mut [f64]) {
        match self {
            ManifoldSpec::Translated { base, shift } => {
                for (o, s) in out.iter_mut().zip(shift) {
                    *o += s;
                }
                base.accumulate_shift(out);
            }
            ManifoldSpec::OffsetCopy { base, .. } => {
                let n = base.ambient_dim();
                base.accumulate_shift(&mut out[..n]);
            }
            _ => {}
        }
    }

    /// Circle center and radius, if this component is a (translated) circle.
    pub(crate) fn as_circle(&self) -> Option<(Vec<f64>, f64)> {
        match self {
            ManifoldSpec::Circle { radius, .. } => Some((vec![0.0, 0.0], *radius)),
            ManifoldSpec::Translated { base, shift } => base.as_circle().map(|(c, r)| {
                (c.iter().zip(shift).map(|(a, b)| a + b).collect(), r)
            }),
            _ => None,
        }
    }

    /// Box corners, if this component is a (translated) non-periodic cube.
    pub(crate) fn as_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            ManifoldSpec::FlatCube {
                sides,
                lower,
                periodic: false,
                ..
            } => {
                let lo = lower.clone().unwrap_or_else(|| vec![0.0; sides.len()]);
                let hi = lo.iter().zip(sides).map(|(a, s)| a + s).collect();
                Some((lo, hi))
            }
            ManifoldSpec::Translated { base, shift } => base.as_box().map(|(lo, hi)| {
                (
                    lo.iter().zip(shift).map(|(a, b)| a + b).collect(),
                    hi.iter().zip(shift).map(|(a, b)| a + b).collect(),
                )
            }),
            _ => None,
        }
    }
}

fn validate_density(d: &SignalDensity) -> Result<()> {
    match d {
        SignalDensity::Uniform => Ok(()),
        SignalDensity::Tilted { amplitude } => {
            if (0.0..1.0).contains(amplitude) {
                Ok(())
            } else {
                Err(config(format!("tilt amplitude must lie in [0, 1), got {amplitude}")))
            }
        }
    }
}

/// Corners of grid cell `cell` (1-based) of the `grid^dim` partition of the
/// unit cube. The first axis varies slowest.
pub fn cell_bounds(dim: usize, grid: usize, cell: usize) -> (Vec<f64>, Vec<f64>) {
    let mut idx = cell - 1;
    let mut digits = vec![0usize; dim];
    for a in (0..dim).rev() {
        digits[a] = idx % grid;
        idx /= grid;
    }
    let g = grid as f64;
    let lo: Vec<f64> = digits.iter().map(|&i| i as f64 / g).collect();
    let hi = lo.iter().map(|a| a + 1.0 / g).collect();
    (lo, hi)
}
