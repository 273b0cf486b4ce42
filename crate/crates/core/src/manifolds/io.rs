//! JSON model descriptors and CSV point clouds.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{lowerbound_model, parallel_copies_model, ManifoldSpec, MultiManifoldModel};
use super::{PointCloud, Sample};
use crate::error::{config, Error, Result};

/// Serializable model description, either explicit or one of the named
/// constructions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "construction", rename_all = "kebab-case")]
pub enum ModelDescriptor {
    Explicit {
        components: Vec<ManifoldSpec>,
        /// Defaults to equal weights.
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    ParallelCopies { base: ManifoldSpec, offset: f64 },
    LowerBound { dim: usize, grid: usize, cell: usize },
}

impl ModelDescriptor {
    pub fn build(&self) -> Result<MultiManifoldModel> {
        match self {
            ModelDescriptor::Explicit {
                components,
                weights: Some(w),
            } => MultiManifoldModel::new(components.clone(), w.clone()),
            ModelDescriptor::Explicit {
                components,
                weights: None,
            } => MultiManifoldModel::uniform(components.clone()),
            ModelDescriptor::ParallelCopies { base, offset } => parallel_copies_model(base, *offset),
            ModelDescriptor::LowerBound { dim, grid, cell } => lowerbound_model(*dim, *grid, *cell),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config(format!("model descriptor: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serializes")
    }
}

impl From<&MultiManifoldModel> for ModelDescriptor {
    fn from(m: &MultiManifoldModel) -> Self {
        ModelDescriptor::Explicit {
            components: m.components.clone(),
            weights: Some(m.weights.clone()),
        }
    }
}

/// Columns `index, k, x_1..x_D, phi_1.., psi_1..` with 1-based `k`.
pub fn write_cloud_csv<W: Write>(cloud: &PointCloud, out: W) -> Result<()> {
    let m = &cloud.model;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string(), "k".to_string()];
    header.extend((1..=m.ambient_dim()).map(|i| format!("x_{i}")));
    header.extend((1..=m.signal_dim()).map(|i| format!("phi_{i}")));
    header.extend((1..=m.nuisance_dim()).map(|i| format!("psi_{i}")));
    w.write_record(&header)?;
    for (i, s) in cloud.samples.iter().enumerate() {
        let mut row = vec![i.to_string(), (s.k + 1).to_string()];
        row.extend(s.x.iter().chain(&s.phi).chain(&s.psi).map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cloud_csv<R: Read>(input: R, model: &MultiManifoldModel, seed: u64) -> Result<PointCloud> {
    let (dd, ds, dv) = (model.ambient_dim(), model.signal_dim(), model.nuisance_dim());
    let mut rd = csv::Reader::from_reader(input);
    let mut samples = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != 2 + dd + ds + dv {
            return Err(Error::DimensionMismatch {
                expected: 2 + dd + ds + dv,
                got: rec.len(),
            });
        }
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .parse::<f64>()
                .map_err(|e| config(format!("cloud CSV field {j}: {e}")))
        };
        let k: usize = rec[1]
            .parse()
            .map_err(|e| config(format!("cloud CSV component: {e}")))?;
        if k == 0 || k > model.k() {
            return Err(config(format!("component {k} outside 1..={}", model.k())));
        }
        let vals = (2..rec.len()).map(num).collect::<Result<Vec<f64>>>()?;
        samples.push(Sample {
            x: vals[..dd].to_vec(),
            k: k - 1,
            phi: vals[dd..dd + ds].to_vec(),
            psi: vals[dd + ds..].to_vec(),
        });
    }
    if samples.is_empty() {
        return Err(config("cloud CSV holds no samples"));
    }
    Ok(PointCloud {
        samples,
        model: model.clone(),
        seed,
    })
}
