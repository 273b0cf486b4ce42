//! Seeded experiment sweeps with CSV/JSON persistence and SVG plots.
//!
//! A sweep is split into independent cells; each cell owns its RNG streams
//! and record buffer, cells run on the rayon pool, and records are merged
//! in cell-key order so output does not depend on scheduling.

mod config;
mod pipeline;
mod plot;
mod runs;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config as config_error, Result};

pub use config::{
    radius_schedule, DownstreamSettings, ExperimentConfig, ExperimentKind, LowerBoundSettings, MethodId,
    SolverSettings,
};
pub use pipeline::{build_laplacian, complete_group_count, embed, reference, Embedded, Reference};
pub use plot::{emit_plots, render_plot, Plot};
pub use runs::{run_counterexample, run_convergence, run_downstream, run_lowerbound, run_phase};

/// One result row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub manifest_id: String,
    pub kind: String,
    pub method: String,
    pub n: usize,
    pub m: Option<usize>,
    pub delta: Option<f64>,
    pub r: Option<f64>,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

/// Wall time and outcome of one sweep cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: String,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_id: String,
    pub kind: ExperimentKind,
    pub tool_version: String,
    pub seeds: Vec<u64>,
    pub config: ExperimentConfig,
    pub cells: Vec<CellReport>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<ExperimentRecord>,
    pub manifest: RunManifest,
    /// Kind-specific table (downstream and lower-bound runs).
    pub extra_csv: Option<(String, Vec<u8>)>,
}

impl RunOutput {
    /// Values of `metric` for `method`, in record order.
    pub fn values(&self, method: &str, metric: &str) -> Vec<&ExperimentRecord> {
        self.records
            .iter()
            .filter(|r| r.method == method && r.metric == metric)
            .collect()
    }
}

/// Hex SHA-256 prefix of the canonical JSON form of the configuration,
/// with the output directory left out.
pub fn run_id(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.output = None;
    let json = serde_json::to_string(&c).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::Convergence => run_convergence(cfg),
        ExperimentKind::Phase => run_phase(cfg),
        ExperimentKind::Counterexample => run_counterexample(cfg),
        ExperimentKind::Downstream => run_downstream(cfg),
        ExperimentKind::Lowerbound => run_lowerbound(cfg),
    }
}

pub fn write_records_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Write `records.csv`, `manifest.json`, any kind-specific CSV and the plots
/// under `<out>/<kind>/<run-id>/`; returns that directory.
pub fn write_run(output: &RunOutput, out: &Path) -> Result<PathBuf> {
    let dir = out
        .join(output.manifest.kind.name())
        .join(&output.manifest.manifest_id);
    std::fs::create_dir_all(&dir)?;
    write_records_csv(&output.records, std::fs::File::create(dir.join("records.csv"))?)?;
    let manifest = serde_json::to_string_pretty(&output.manifest)?;
    std::fs::write(dir.join("manifest.json"), manifest)?;
    if let Some((name, bytes)) = &output.extra_csv {
        std::fs::write(dir.join(name), bytes)?;
    }
    if !output.records.is_empty() {
        for (name, svg) in emit_plots(&output.records, output.manifest.kind)? {
            std::fs::write(dir.join(name), svg)?;
        }
    }
    Ok(dir)
}

/// Records whose manifest id differs from `manifest`'s.
pub fn orphan_records<'a>(records: &'a [ExperimentRecord], manifest: &RunManifest) -> Vec<&'a ExperimentRecord> {
    records
        .iter()
        .filter(|r| r.manifest_id != manifest.manifest_id)
        .collect()
}

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    Some(if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    })
}

/// Median of `metric` for `method` grouped by a key.
pub fn median_by<K: Ord + Clone>(
    records: &[ExperimentRecord],
    method: &str,
    metric: &str,
    key: impl Fn(&ExperimentRecord) -> K,
) -> Vec<(K, f64)> {
    let mut groups: std::collections::BTreeMap<K, Vec<f64>> = Default::default();
    for r in records.iter().filter(|r| r.method == method && r.metric == metric) {
        groups.entry(key(r)).or_default().push(r.value);
    }
    groups
        .into_iter()
        .filter_map(|(k, mut v)| median(&mut v).map(|m| (k, m)))
        .collect()
}

pub(crate) fn require_records(records: &[ExperimentRecord]) -> Result<()> {
    if records.is_empty() {
        Err(config_error("no records to plot"))
    } else {
        Ok(())
    }
}
