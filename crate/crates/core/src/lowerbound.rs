//! Chi-square divergence bounds for the cube construction (one flat cube
//! against the same cube split into an outer piece and a small inner cube)
//! and a Monte-Carlo likelihood-ratio test on that construction.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{config, Result};
use crate::manifolds::{lowerbound_model, ManifoldSpec, MultiManifoldModel};
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LowerBoundConfig {
    pub n: usize,
    /// Effective dimension: `d` for the plain problem, `d_s` with augmentation.
    pub dim: usize,
    /// Grid count `M` per axis.
    pub grid: usize,
}

impl LowerBoundConfig {
    pub fn new(n: usize, dim: usize, grid: usize) -> Result<Self> {
        let cfg = LowerBoundConfig { n, dim, grid };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `M = ceil((2n / ln n)^(1/dim))`.
    pub fn scheduled(n: usize, dim: usize) -> Result<Self> {
        if n < 2 || dim == 0 {
            return Err(config("the grid schedule needs n >= 2 and dim >= 1"));
        }
        let nf = n as f64;
        let grid = (2.0 * nf / nf.ln()).powf(1.0 / dim as f64).ceil() as usize;
        Self::new(n, dim, grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.dim == 0 {
            return Err(config("lower-bound configuration needs n >= 1 and dim >= 1"));
        }
        if self.grid < 2 {
            return Err(config("grid count M must be at least 2"));
        }
        let d = self.delta();
        if !(d > 0.0 && d < 0.5) {
            return Err(config(format!("slab volume {d} must lie in (0, 1/2)")));
        }
        Ok(())
    }

    /// Volume of a cell minus its inner cube: `M^-dim - (3M)^-dim`.
    pub fn delta(&self) -> f64 {
        let m = self.grid as f64;
        let k = self.dim as i32;
        m.powi(-k) - (3.0 * m).powi(-k)
    }

    /// Number of cells `L = M^dim`.
    pub fn cells(&self) -> f64 {
        (self.grid as f64).powi(self.dim as i32)
    }
}

/// Natural log of the bound
/// `exp(n D / (1 - D)) / L + n D^2 / ((1 - D) sqrt(1 - 2 D))`.
pub fn chi2_bound_ln(cfg: &LowerBoundConfig) -> Result<f64> {
    cfg.validate()?;
    let d = cfg.delta();
    let n = cfg.n as f64;
    let a = n * d / (1.0 - d) - cfg.cells().ln();
    let b = (n * d * d).ln() - (1.0 - d).ln() - 0.5 * (1.0 - 2.0 * d).ln();
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    Ok(hi + (lo - hi).exp().ln_1p())
}

/// The bound itself; `inf` once it exceeds the `f64` range.
pub fn chi2_bound(cfg: &LowerBoundConfig) -> Result<f64> {
    Ok(chi2_bound_ln(cfg)?.exp())
}

/// Same closed form with the signal dimension `d_s` as exponent.
pub fn aiml_chi2_bound(n: usize, signal_dim: usize, grid: usize) -> Result<f64> {
    chi2_bound(&LowerBoundConfig::new(n, signal_dim, grid)?)
}

fn axis_cells(cfg: &LowerBoundConfig, x: &[f64]) -> Option<usize> {
    // 0-based cell index with the first axis slowest, or None when x sits
    // in the inner cube of its cell.
    let m = cfg.grid as f64;
    let mut idx = 0;
    let mut inner = true;
    for &v in &x[..cfg.dim] {
        let c = ((v * m).floor() as usize).min(cfg.grid - 1);
        let centre = (c as f64 + 0.5) / m;
        if (v - centre).abs() > 1.0 / (6.0 * m) {
            inner = false;
        }
        idx = idx * cfg.grid + c;
    }
    (!inner).then_some(idx)
}

/// Number of cells whose slab `Q_l \ Q~_l` holds no point. The average
/// likelihood ratio is `(1 - D)^-n * clean / L`, so the test thresholds
/// this count.
pub fn clean_cells(cfg: &LowerBoundConfig, points: &[Vec<f64>]) -> usize {
    let total = cfg.grid.pow(cfg.dim as u32);
    let mut hit = vec![false; total];
    for p in points {
        if let Some(l) = axis_cells(cfg, p) {
            hit[l] = true;
        }
    }
    hit.iter().filter(|h| !**h).count()
}

/// Likelihood ratio `F_l` of the alternative built on cell `l` (1-based)
/// against the single cube.
pub fn likelihood_ratio(cfg: &LowerBoundConfig, points: &[Vec<f64>], cell: usize) -> f64 {
    let clean = points.iter().all(|p| axis_cells(cfg, p) != Some(cell - 1));
    if clean {
        (-(points.len() as f64) * (1.0 - cfg.delta()).ln()).exp()
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LrTestResult {
    pub config: LowerBoundConfig,
    pub alpha: f64,
    pub trials: usize,
    /// Rejection threshold on the clean-cell count; `None` when `alpha = 1`.
    pub threshold: Option<usize>,
    pub type1: f64,
    pub type2: f64,
    pub error_sum: f64,
    pub type1_se: f64,
    pub type2_se: f64,
    pub error_sum_se: f64,
    pub chi2_bound: f64,
}

fn null_model(dim: usize) -> Result<MultiManifoldModel> {
    MultiManifoldModel::new(vec![ManifoldSpec::cube(vec![1.0; dim])], vec![1.0])
}

fn draw(model: &MultiManifoldModel, n: usize, seed: u64, tag: &str, trial: usize) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, tag, trial as u64);
    (0..n).map(|_| model.sample_with(&mut rng).x).collect()
}

/// Likelihood-ratio test of one cube against the split-cube mixture.
/// The threshold is the empirical `(1 - alpha)` quantile of the statistic
/// over `trials` null calibration draws; the test rejects when the
/// statistic is strictly greater. Type-I error is then measured on fresh
/// null draws and type-II on alternative draws that pick the cell
/// uniformly.
pub fn simulate_lr_test(cfg: &LowerBoundConfig, alpha: f64, trials: usize, seed: u64) -> Result<LrTestResult> {
    cfg.validate()?;
    if trials < 100 {
        return Err(config("the likelihood-ratio simulation needs at least 100 trials"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(config("alpha must lie in [0, 1]"));
    }
    let null = null_model(cfg.dim)?;
    let cells = cfg.grid.pow(cfg.dim as u32);
    let alternatives = (1..=cells)
        .map(|l| lowerbound_model(cfg.dim, cfg.grid, l))
        .collect::<Result<Vec<_>>>()?;

    let stat_null = |tag: &str| -> Vec<usize> {
        (0..trials)
            .into_par_iter()
            .map(|t| clean_cells(cfg, &draw(&null, cfg.n, seed, tag, t)))
            .collect()
    };
    let mut calibration = stat_null("lr-calibrate");
    let evaluation = stat_null("lr-null");
    let alt: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let l = stream(seed, "lr-cell", t as u64).gen_range(0..cells);
            clean_cells(cfg, &draw(&alternatives[l], cfg.n, seed, "lr-alt", t))
        })
        .collect();

    calibration.sort_unstable();
    let threshold = if alpha >= 1.0 {
        None
    } else {
        let rank = ((1.0 - alpha) * trials as f64).ceil() as usize;
        Some(calibration[rank.clamp(1, trials) - 1])
    };
    let reject = |s: usize| threshold.is_none_or(|t| s > t);
    let tf = trials as f64;
    let type1 = evaluation.iter().filter(|&&s| reject(s)).count() as f64 / tf;
    let type2 = alt.iter().filter(|&&s| !reject(s)).count() as f64 / tf;
    let se = |p: f64| (p * (1.0 - p) / tf).sqrt();
    Ok(LrTestResult {
        config: *cfg,
        alpha,
        trials,
        threshold,
        type1,
        type2,
        error_sum: type1 + type2,
        type1_se: se(type1),
        type2_se: se(type2),
        error_sum_se: (se(type1).powi(2) + se(type2).powi(2)).sqrt(),
        chi2_bound: chi2_bound(cfg)?,
    })
}

#[derive(Serialize)]
struct LowerBoundRow {
    dim: usize,
    n: usize,
    #[serde(rename = "M")]
    grid: usize,
    #[serde(rename = "Delta")]
    delta: f64,
    chi2_bound: f64,
    alpha: f64,
    type1: f64,
    type2: f64,
    error_sum: f64,
    trials: usize,
}

pub fn write_lowerbound_csv<W: Write>(results: &[LrTestResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(LowerBoundRow {
            dim: r.config.dim,
            n: r.config.n,
            grid: r.config.grid,
            delta: r.config.delta(),
            chi2_bound: r.chi2_bound,
            alpha: r.alpha,
            type1: r.type1,
            type2: r.type2,
            error_sum: r.error_sum,
            trials: r.trials,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    // Closed form re-evaluated at 50 significant digits.
    const FROZEN: [(usize, usize, usize, f64); 5] = [
        (1, 1, 3, 0.528_754_274_482_441_98),
        (1000, 1, 290, 0.039_845_785_276_595_665),
        (1000, 2, 18, 0.055_897_764_590_943_547),
        (1_000_000, 1, 144_765, 0.000_711_993_295_820_607_55),
        (5000, 3, 4, 2.320_325_757_336_920_3e31),
    ];

    #[test]
    fn bound_matches_high_precision_values() {
        for (n, d, m, want) in FROZEN {
            let got = chi2_bound(&LowerBoundConfig::new(n, d, m).unwrap()).unwrap();
            assert!(rel(got, want) < 1e-12, "{n} {d} {m}: {got} vs {want}");
        }
        let huge = LowerBoundConfig::new(200, 1, 2).unwrap();
        assert!(rel(chi2_bound_ln(&huge).unwrap(), 1.344_058_570_908_067_7e43f64.ln()) < 1e-14);
        let overflow = LowerBoundConfig::new(1_000_000, 1, 2).unwrap();
        assert!(chi2_bound_ln(&overflow).unwrap() > 700.0);
        assert_eq!(chi2_bound(&overflow).unwrap(), f64::INFINITY);
    }

    #[test]
    fn small_slab_limit() {
        let cfg = LowerBoundConfig::new(1, 1, 100_000).unwrap();
        assert!(rel(chi2_bound(&cfg).unwrap(), 1.0 / cfg.cells()) < 1e-4);
    }

    #[test]
    fn config_checks() {
        assert!(LowerBoundConfig::new(10, 1, 1).is_err());
        assert!(LowerBoundConfig::new(10, 0, 3).is_err());
        let cfg = LowerBoundConfig::new(10, 1, 3).unwrap();
        assert!((cfg.delta() - 2.0 / 9.0).abs() < 1e-16);
        assert_eq!(LowerBoundConfig::scheduled(1000, 1).unwrap().grid, 290);
    }

    fn schedule(dim: usize) -> Vec<f64> {
        let mut out = Vec::new();
        let mut n = 1000;
        while n <= 1_000_000 {
            out.push(chi2_bound(&LowerBoundConfig::scheduled(n, dim).unwrap()).unwrap());
            n *= 2;
        }
        out
    }

    #[test]
    fn schedule_bound_decreases_in_one_dimension() {
        let b = schedule(1);
        assert!(b.windows(2).all(|w| w[1] < w[0]), "{b:?}");
    }

    #[test]
    fn schedule_bound_vanishes_in_higher_dimensions() {
        // The ceiling on M makes single doublings non-monotone for dim >= 2
        // (n = 1000 -> 2000 at dim 2), but the bound still shrinks overall.
        let two = schedule(2);
        assert!(two[1] > two[0]);
        for dim in 2..=3 {
            let b = schedule(dim);
            assert!(b.last().unwrap() < &(b[0] / 4.0), "{dim}: {b:?}");
            let n = 1u64 << 40;
            let cfg = LowerBoundConfig::scheduled(n as usize, dim).unwrap();
            assert!(chi2_bound(&cfg).unwrap() < 1e-3);
        }
    }

    #[test]
    fn signal_dimension_variant() {
        let plain = chi2_bound(&LowerBoundConfig::new(500, 2, 7).unwrap()).unwrap();
        assert_eq!(aiml_chi2_bound(500, 2, 7).unwrap(), plain);
        let full = LowerBoundConfig::new(500, 3, 7).unwrap();
        let signal = LowerBoundConfig::new(500, 1, 7).unwrap();
        assert!(signal.delta() > full.delta());
        assert!(aiml_chi2_bound(500, 1, 7).unwrap() > chi2_bound(&full).unwrap());
        let mut prev = f64::INFINITY;
        for n in [1000, 4000, 16000, 64000] {
            let b = chi2_bound(&LowerBoundConfig::scheduled(n, 1).unwrap()).unwrap();
            assert!(b < prev);
            prev = b;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn likelihood_ratio_by_hand() {
        let cfg = LowerBoundConfig::new(2, 1, 2).unwrap();
        // Cell 1 is [0, 1/2) with inner cube [1/6, 1/3].
        let inner = vec![vec![0.2], vec![0.9]];
        let want = (1.5f64).powi(2);
        assert!((likelihood_ratio(&cfg, &inner, 1) - want).abs() < 1e-15);
        assert_eq!(likelihood_ratio(&cfg, &inner, 2), 0.0);
        assert_eq!(clean_cells(&cfg, &inner), 1);
        let slab = vec![vec![0.05], vec![0.7]];
        assert_eq!(likelihood_ratio(&cfg, &slab, 1), 0.0);
        assert!((likelihood_ratio(&cfg, &[vec![0.75], vec![0.8]], 2) - want).abs() < 1e-15);
        let cfg2 = LowerBoundConfig::new(1, 2, 2).unwrap();
        // Cell 2 is x in [0, 1/2), y in [1/2, 1).
        let p = vec![vec![0.25, 0.75]];
        assert_eq!(clean_cells(&cfg2, &p), 4);
        let q = vec![vec![0.1, 0.9]];
        assert_eq!(likelihood_ratio(&cfg2, &q, 2), 0.0);
        assert_eq!(clean_cells(&cfg2, &q), 3);
    }

    #[test]
    fn average_ratio_has_unit_null_mean() {
        // E_0 F_l = 1 for every l; check the average over cells by MC.
        let cfg = LowerBoundConfig::new(3, 1, 4).unwrap();
        let null = null_model(1).unwrap();
        let trials = 20_000;
        let scale = (-(cfg.n as f64) * (1.0 - cfg.delta()).ln()).exp() / cfg.cells();
        let vals: Vec<f64> = (0..trials)
            .map(|t| scale * clean_cells(&cfg, &draw(&null, cfg.n, 4, "mean", t)) as f64)
            .collect();
        let mean = vals.iter().sum::<f64>() / trials as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / trials as f64).sqrt();
        assert!((mean - 1.0).abs() < 4.0 * sd / (trials as f64).sqrt(), "{mean}");
    }

    #[test]
    fn easy_instance_is_detected() {
        let cfg = LowerBoundConfig::new(200, 1, 2).unwrap();
        let res = simulate_lr_test(&cfg, 0.05, 2000, 1).unwrap();
        assert!(res.error_sum < 0.1, "{res:?}");
    }

    #[test]
    fn tiny_sample_obeys_the_inequality() {
        for (d, m) in [(1, 3), (2, 2), (1, 5)] {
            let cfg = LowerBoundConfig::new(1, d, m).unwrap();
            let res = simulate_lr_test(&cfg, 0.05, 4000, 2).unwrap();
            let bound = 1.0 - res.chi2_bound - 3.0 * res.error_sum_se;
            assert!(res.error_sum >= bound, "{res:?}");
        }
    }

    #[test]
    fn alpha_one_rejects_everything() {
        let cfg = LowerBoundConfig::new(50, 1, 4).unwrap();
        let res = simulate_lr_test(&cfg, 1.0, 200, 3).unwrap();
        assert_eq!(res.type1, 1.0);
        assert_eq!(res.type2, 0.0);
        assert_eq!(res.threshold, None);
        assert!(simulate_lr_test(&cfg, 0.05, 99, 3).is_err());
    }

    #[test]
    fn simulation_is_deterministic_and_csv() {
        let cfg = LowerBoundConfig::new(30, 1, 6).unwrap();
        let a = simulate_lr_test(&cfg, 0.1, 300, 9).unwrap();
        let b = simulate_lr_test(&cfg, 0.1, 300, 9).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_lowerbound_csv(&[a], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("dim,n,M,Delta,chi2_bound,alpha,type1,type2,error_sum,trials\n1,30,6,"));
    }
}
