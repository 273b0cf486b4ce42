//! Experiment configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aiml::DEFAULT_N_AUG;
use crate::error::{config, Error, Result};
use crate::manifolds::{ManifoldSpec, ModelDescriptor, MultiManifoldModel};
use crate::spectral::EigenOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Convergence,
    Phase,
    Counterexample,
    Downstream,
    Lowerbound,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Phase => "phase",
            ExperimentKind::Counterexample => "counterexample",
            ExperimentKind::Downstream => "downstream",
            ExperimentKind::Lowerbound => "lowerbound",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(text.to_string()))
            .map_err(|_| config(format!("unknown experiment kind {text:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodId {
    Cml,
    AimlKernel,
    AimlMc,
}

impl MethodId {
    pub fn name(&self) -> &'static str {
        match self {
            MethodId::Cml => "cml",
            MethodId::AimlKernel => "aiml-kernel",
            MethodId::AimlMc => "aiml-mc",
        }
    }

    pub fn is_aiml(&self) -> bool {
        !matches!(self, MethodId::Cml)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub jacobi: bool,
    pub block: Option<usize>,
    /// Augmentation pairs per Monte Carlo weight.
    pub n_aug: usize,
    pub kmeans_restarts: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let e = EigenOptions::default();
        SolverSettings {
            tol: e.tol,
            max_iter: e.max_iter,
            jacobi: e.jacobi,
            block: e.block,
            n_aug: DEFAULT_N_AUG,
            kmeans_restarts: 10,
        }
    }
}

impl SolverSettings {
    pub fn eigen_options(&self, seed: u64) -> EigenOptions {
        EigenOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            seed,
            block: self.block,
            jacobi: self.jacobi,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DownstreamSettings {
    /// One `+`/`-` per component.
    pub pattern: String,
    pub iterations: usize,
    pub eta: f64,
    pub test_size: usize,
    pub stratify: bool,
    /// Sample size held fixed in the `m` sweep.
    pub fixed_n: usize,
    /// Labeled-set size held fixed in the `n` sweep.
    pub fixed_m: usize,
}

impl Default for DownstreamSettings {
    fn default() -> Self {
        DownstreamSettings {
            pattern: "+-".into(),
            iterations: 1000,
            eta: 1.0,
            test_size: 2000,
            stratify: true,
            fixed_n: 4000,
            fixed_m: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowerBoundSettings {
    pub dim: usize,
    pub alpha: f64,
    pub trials: usize,
    /// Overrides the schedule `M = ceil((2n / ln n)^(1/dim))`.
    pub grid: Option<usize>,
}

impl Default for LowerBoundSettings {
    fn default() -> Self {
        LowerBoundSettings {
            dim: 1,
            alpha: 0.05,
            trials: 10_000,
            grid: None,
        }
    }
}

/// One sweep. Radii follow `r = c (ln n / n)^(1/dim)` with `dim = d` for the
/// radius graph and `dim = d_s` for averaged weights, unless `r_fixed` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Not needed for lower-bound runs.
    #[serde(default)]
    pub model: Option<ModelDescriptor>,
    pub n: Vec<usize>,
    /// Labeled-set sizes (downstream only).
    #[serde(default)]
    pub m: Vec<usize>,
    /// Copy offsets (phase runs).
    #[serde(default)]
    pub delta: Vec<f64>,
    /// Copy offsets as multiples of the radius-graph `r` (counterexample runs).
    #[serde(default)]
    pub delta_over_r: Vec<f64>,
    #[serde(default = "default_c")]
    pub r_constant: f64,
    /// Defaults to `r_constant`.
    #[serde(default)]
    pub r_constant_aiml: Option<f64>,
    #[serde(default)]
    pub r_fixed: Option<f64>,
    pub methods: Vec<MethodId>,
    pub seeds: Vec<u64>,
    /// Eigenpairs per solve; defaults to the number of components (at least 3
    /// for convergence runs, completed to a whole multiplicity group).
    #[serde(default)]
    pub eigen_count: Option<usize>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub downstream: DownstreamSettings,
    #[serde(default)]
    pub lowerbound: LowerBoundSettings,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_c() -> f64 {
    2.0
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// JSON when the extension is `.json`, TOML otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = |len: usize, what: &str| {
            if len == 0 {
                Err(config(format!("{what} grid must not be empty")))
            } else {
                Ok(())
            }
        };
        nonempty(self.n.len(), "n")?;
        nonempty(self.seeds.len(), "seed")?;
        if self.n.contains(&0) {
            return Err(config("sample sizes must be positive"));
        }
        if self.kind == ExperimentKind::Lowerbound {
            if self.n.contains(&1) && self.lowerbound.grid.is_none() {
                return Err(config("the grid schedule needs n >= 2"));
            }
            return Ok(());
        }
        nonempty(self.methods.len(), "method")?;
        let model = self.build_model()?;
        if !(self.r_constant > 0.0) || self.r_constant_aiml.is_some_and(|c| !(c > 0.0)) {
            return Err(config("radius constants must be positive"));
        }
        if self.r_fixed.is_some_and(|r| !(r > 0.0)) {
            return Err(config("fixed radius must be positive"));
        }
        if self.methods.iter().any(|m| m.is_aiml()) && model.nuisance_dim() == 0 && model.signal_dim() == 0 {
            return Err(config("averaged weights need a product model"));
        }
        let copies = matches!(self.model, Some(ModelDescriptor::ParallelCopies { .. }));
        match self.kind {
            ExperimentKind::Phase => {
                nonempty(self.delta.len(), "delta")?;
                if !copies {
                    return Err(config("phase runs need a parallel-copies model"));
                }
            }
            ExperimentKind::Counterexample => {
                nonempty(self.delta_over_r.len(), "delta_over_r")?;
                if !copies {
                    return Err(config("counterexample runs need a parallel-copies model"));
                }
            }
            ExperimentKind::Downstream => {
                nonempty(self.m.len(), "m")?;
                let p = crate::downstream::LabelPattern::parse(&self.downstream.pattern)?;
                if p.signs.len() != model.k() {
                    return Err(Error::DimensionMismatch {
                        expected: model.k(),
                        got: p.signs.len(),
                    });
                }
            }
            _ => {}
        }
        if self.delta.iter().chain(&self.delta_over_r).any(|d| !(*d > 0.0)) {
            return Err(config("offsets must be positive"));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<MultiManifoldModel> {
        self.model
            .as_ref()
            .ok_or_else(|| config(format!("{} runs need a model", self.kind.name())))?
            .build()
    }

    /// Model with the copy offset replaced by `delta`.
    pub fn model_with_offset(&self, delta: f64) -> Result<MultiManifoldModel> {
        match &self.model {
            Some(ModelDescriptor::ParallelCopies { base, .. }) => ModelDescriptor::ParallelCopies {
                base: base.clone(),
                offset: delta,
            }
            .build(),
            _ => Err(config("offset sweeps need a parallel-copies model")),
        }
    }

    /// Radius for `method` at sample size `n` on `model`.
    pub fn radius(&self, method: MethodId, n: usize, model: &MultiManifoldModel) -> f64 {
        if let Some(r) = self.r_fixed {
            return r;
        }
        let (c, dim) = if method.is_aiml() {
            (self.r_constant_aiml.unwrap_or(self.r_constant), model.signal_dim())
        } else {
            (self.r_constant, model.dim())
        };
        radius_schedule(c, n, dim)
    }

    /// Built-in configuration for each experiment kind.
    pub fn preset(kind: ExperimentKind) -> Self {
        let circle = ManifoldSpec::circle(1.0);
        let torus = ManifoldSpec::product(ManifoldSpec::circle(0.5), ManifoldSpec::circle(0.5));
        let base = ExperimentConfig {
            kind,
            model: None,
            n: vec![500, 1000, 2000, 4000],
            m: Vec::new(),
            delta: Vec::new(),
            delta_over_r: Vec::new(),
            r_constant: 2.0,
            r_constant_aiml: None,
            r_fixed: None,
            methods: vec![MethodId::Cml],
            seeds: (0..5).collect(),
            eigen_count: None,
            solver: SolverSettings::default(),
            downstream: DownstreamSettings::default(),
            lowerbound: LowerBoundSettings::default(),
            output: None,
        };
        match kind {
            ExperimentKind::Convergence => ExperimentConfig {
                model: Some(ModelDescriptor::Explicit {
                    components: vec![circle],
                    weights: None,
                }),
                ..base
            },
            ExperimentKind::Phase => ExperimentConfig {
                model: Some(ModelDescriptor::ParallelCopies { base: torus, offset: 0.1 }),
                n: vec![1000, 2000, 4000],
                delta: vec![0.01, 0.02, 0.045, 0.1, 0.2],
                r_constant_aiml: Some(10.0),
                methods: vec![MethodId::Cml, MethodId::AimlKernel],
                ..base
            },
            ExperimentKind::Counterexample => ExperimentConfig {
                model: Some(ModelDescriptor::ParallelCopies { base: circle, offset: 0.1 }),
                n: vec![4000],
                delta_over_r: vec![0.1, 2.0],
                r_constant: 4.0,
                seeds: (0..10).collect(),
                ..base
            },
            ExperimentKind::Downstream => ExperimentConfig {
                model: Some(ModelDescriptor::ParallelCopies { base: torus, offset: 0.045 }),
                m: vec![10, 20, 40, 80],
                r_constant_aiml: Some(10.0),
                methods: vec![MethodId::Cml, MethodId::AimlKernel],
                ..base
            },
            ExperimentKind::Lowerbound => ExperimentConfig {
                n: vec![1000, 2000, 4000, 8000],
                seeds: vec![0],
                methods: Vec::new(),
                ..base
            },
        }
    }
}

/// `c (ln n / n)^(1/dim)`.
pub fn radius_schedule(c: f64, n: usize, dim: usize) -> f64 {
    let nf = n as f64;
    c * (nf.ln() / nf).powf(1.0 / dim.max(1) as f64)
}
