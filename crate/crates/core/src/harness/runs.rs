//! The five sweep kinds.

use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind, MethodId};
use super::pipeline::{complete_group_count, embed, operator_for, reference};
use super::{run_id, CellReport, ExperimentRecord, RunManifest, RunOutput};
use crate::downstream::{
    draw_labeled_set, logistic_gd, misclassification, separability_margin, write_downstream_csv, DownstreamRow,
    LabelPattern,
};
use crate::error::Result;
use crate::lowerbound::{simulate_lr_test, write_lowerbound_csv, LowerBoundConfig, LrTestResult};
use crate::manifolds::{sample_cloud, ModelDescriptor, MultiManifoldModel, PointCloud};
use crate::rng::derive_seed;
use crate::spectral::{align_to_reference, spectral_cluster, EmbeddingMatrix};

/// Shared coordinates of the rows one cell emits for one method.
#[derive(Clone)]
struct Row<'a> {
    id: &'a str,
    kind: ExperimentKind,
    method: String,
    n: usize,
    m: Option<usize>,
    delta: Option<f64>,
    r: Option<f64>,
    seed: u64,
}

impl Row<'_> {
    fn at(&self, metric: impl Into<String>, value: f64) -> ExperimentRecord {
        ExperimentRecord {
            manifest_id: self.id.to_string(),
            kind: self.kind.name().to_string(),
            method: self.method.clone(),
            n: self.n,
            m: self.m,
            delta: self.delta,
            r: self.r,
            seed: self.seed,
            metric: metric.into(),
            value,
        }
    }
}

/// Run cells in parallel and merge in cell order. A failing cell is logged
/// in the manifest and contributes a `failed` row; the sweep goes on.
fn run_cells<K, X, F>(cells: &[(String, K)], failed: impl Fn(&K) -> ExperimentRecord + Sync, f: F) -> (Vec<ExperimentRecord>, Vec<CellReport>, Vec<X>)
where
    K: Sync,
    X: Send,
    F: Fn(&K) -> Result<(Vec<ExperimentRecord>, Vec<X>)> + Sync,
{
    let results: Vec<_> = cells
        .par_iter()
        .map(|(label, key)| {
            let t = Instant::now();
            let out = f(key);
            (label.clone(), key, t.elapsed().as_secs_f64(), out)
        })
        .collect();
    let mut records = Vec::new();
    let mut reports = Vec::new();
    let mut extras = Vec::new();
    for (label, key, wall, out) in results {
        let error = match out {
            Ok((rows, x)) => {
                records.extend(rows);
                extras.extend(x);
                None
            }
            Err(e) => {
                records.push(failed(key));
                Some(e.to_string())
            }
        };
        reports.push(CellReport {
            cell: label,
            wall_seconds: wall,
            error,
        });
    }
    (records, reports, extras)
}

fn manifest(cfg: &ExperimentConfig, id: &str, cells: Vec<CellReport>) -> RunManifest {
    RunManifest {
        manifest_id: id.to_string(),
        kind: cfg.kind,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seeds: cfg.seeds.clone(),
        config: cfg.clone(),
        cells,
    }
}

fn cloud_for(model: &MultiManifoldModel, n: usize, seed: u64) -> Result<PointCloud> {
    sample_cloud(model, n, derive_seed(seed, "cloud", n as u64))
}

fn sorted_n(v: &[usize]) -> Vec<usize> {
    let mut out = v.to_vec();
    out.sort_unstable();
    out.dedup();
    out
}

fn sorted_seeds(v: &[u64]) -> Vec<u64> {
    let mut out = v.to_vec();
    out.sort_unstable();
    out.dedup();
    out
}

fn sorted_f(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn eigen_count(cfg: &ExperimentConfig, floor: usize) -> usize {
    cfg.eigen_count.unwrap_or(floor).max(1)
}

/// Per eigenpair: normalized eigenvalue and its distance to the closed form;
/// per group: RMS of the per-vector `L^2(pi_n)` errors before and after
/// alignment.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let id = run_id(cfg);
    let model = cfg.build_model()?;
    let seeds = sorted_seeds(&cfg.seeds);
    let cells: Vec<(String, (usize, u64))> = sorted_n(&cfg.n)
        .into_iter()
        .flat_map(|n| seeds.iter().map(move |&s| (format!("n={n} seed={s}"), (n, s))))
        .collect();
    let base_row = |&(n, seed): &(usize, u64), method: MethodId, r: Option<f64>| Row {
        id: &id,
        kind: cfg.kind,
        method: method.name().to_string(),
        n,
        m: None,
        delta: None,
        r,
        seed,
    };
    let (records, reports, _) = run_cells::<_, (), _>(
        &cells,
        |key| base_row(key, cfg.methods[0], None).at("failed", 1.0),
        |key| {
            let &(n, seed) = key;
            let cloud = cloud_for(&model, n, seed)?;
            let mut rows = Vec::new();
            for &method in &cfg.methods {
                let r = cfg.radius(method, n, &model);
                let row = base_row(key, method, Some(r));
                let op = operator_for(method);
                let s = complete_group_count(&model, op, eigen_count(cfg, model.k().max(3)))?;
                let e = embed(method, &cloud, r, s, &cfg.solver, seed)?;
                let refm = reference(&model, op, s, &cloud.samples, false)?;
                let al = align_to_reference(&e.eig, &refm.values, &refm.groups)?;
                rows.push(row.at("components", e.components as f64));
                rows.push(row.at("iterations", e.eig.iterations as f64));
                for (j, (&got, &want)) in e.eig.normalized.iter().zip(&refm.eigenvalues).enumerate() {
                    rows.push(row.at(format!("eigenvalue_{}", j + 1), got));
                    rows.push(row.at(format!("eigenvalue_error_{}", j + 1), (got - want).abs()));
                    if want > 0.0 {
                        rows.push(row.at(format!("relative_eigenvalue_error_{}", j + 1), (got - want).abs() / want));
                    }
                    rows.push(row.at(format!("vector_error_{}", j + 1), al.errors_after[j]));
                }
                for g in 0..al.group_errors_after.len() {
                    let size = refm.groups.iter().filter(|&&x| x == g).count() as f64;
                    rows.push(row.at(format!("group_error_before_{g}"), al.group_errors_before[g] / size.sqrt()));
                    rows.push(row.at(format!("group_error_{g}"), al.group_errors_after[g] / size.sqrt()));
                }
            }
            Ok((rows, Vec::new()))
        },
    );
    Ok(RunOutput {
        records,
        manifest: manifest(cfg, &id, reports),
        extra_csv: None,
    })
}

fn truncated(emb: &EmbeddingMatrix, k: usize) -> EmbeddingMatrix {
    let cols = k.min(emb.dim());
    EmbeddingMatrix {
        values: emb.values.columns(0, cols).into_owned(),
        ..emb.clone()
    }
}

/// Clustering accuracy over an `(n, delta)` grid of parallel copies, with
/// the two theoretical threshold curves `(ln n / n)^(1/d)` and
/// `(ln n / n)^(1/d_s)` emitted as `threshold-*` rows.
pub fn run_phase(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let id = run_id(cfg);
    let shape = cfg.build_model()?;
    let mut threshold_rows = Vec::new();
    for &n in &sorted_n(&cfg.n) {
        let l = (n as f64).ln() / n as f64;
        for (name, dim) in [("threshold-cml", shape.dim()), ("threshold-aiml", shape.signal_dim())] {
            let row = Row {
                id: &id,
                kind: cfg.kind,
                method: name.into(),
                n,
                m: None,
                delta: None,
                r: None,
                seed: 0,
            };
            threshold_rows.push(row.at("delta_threshold", l.powf(1.0 / dim.max(1) as f64)));
        }
    }
    let mut cells = Vec::new();
    for &n in &sorted_n(&cfg.n) {
        for &d in &sorted_f(&cfg.delta) {
            for &s in &sorted_seeds(&cfg.seeds) {
                cells.push((format!("n={n} delta={d} seed={s}"), (n, d, s)));
            }
        }
    }
    let row_for = |&(n, d, seed): &(usize, f64, u64), method: MethodId, r: Option<f64>| Row {
        id: &id,
        kind: cfg.kind,
        method: method.name().into(),
        n,
        m: None,
        delta: Some(d),
        r,
        seed,
    };
    let (records, reports, _) = run_cells::<_, (), _>(
        &cells,
        |key| row_for(key, cfg.methods[0], None).at("failed", 1.0),
        |key| {
            let &(n, d, seed) = key;
            let model = cfg.model_with_offset(d)?;
            let cloud = cloud_for(&model, n, seed)?;
            let k = model.k();
            let mut rows = Vec::new();
            for &method in &cfg.methods {
                let r = cfg.radius(method, n, &model);
                let row = row_for(key, method, Some(r));
                let e = embed(method, &cloud, r, eigen_count(cfg, k), &cfg.solver, seed)?;
                let cl = spectral_cluster(&e.embedding, k, cfg.solver.kmeans_restarts, derive_seed(seed, "kmeans", 0))?;
                rows.push(row.at("accuracy", cl.accuracy));
                rows.push(row.at("success", f64::from(u8::from(cl.accuracy >= 0.95))));
                rows.push(row.at("components", e.components as f64));
            }
            Ok((rows, Vec::new()))
        },
    );
    let mut all = threshold_rows;
    all.extend(records);
    Ok(RunOutput {
        records: all,
        manifest: manifest(cfg, &id, reports),
        extra_csv: None,
    })
}

/// Parallel copies offset by `delta_over_r` times the radius-graph radius:
/// clustering accuracy and alignment error against the closed-form
/// spectrum of a single copy, evaluated on latent coordinates.
pub fn run_counterexample(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let id = run_id(cfg);
    let Some(ModelDescriptor::ParallelCopies { base, .. }) = &cfg.model else {
        unreachable!("validated as parallel copies")
    };
    let single = MultiManifoldModel::new(vec![base.clone()], vec![1.0])?;
    let shape = cfg.build_model()?;
    let mut cells = Vec::new();
    for &n in &sorted_n(&cfg.n) {
        for &f in &sorted_f(&cfg.delta_over_r) {
            for &s in &sorted_seeds(&cfg.seeds) {
                let delta = f * cfg.radius(MethodId::Cml, n, &shape);
                cells.push((format!("n={n} delta/r={f} seed={s}"), (n, delta, s)));
            }
        }
    }
    let row_for = |&(n, d, seed): &(usize, f64, u64), method: MethodId, r: Option<f64>| Row {
        id: &id,
        kind: cfg.kind,
        method: method.name().into(),
        n,
        m: None,
        delta: Some(d),
        r,
        seed,
    };
    let (records, reports, _) = run_cells::<_, (), _>(
        &cells,
        |key| row_for(key, cfg.methods[0], None).at("failed", 1.0),
        |key| {
            let &(n, d, seed) = key;
            let model = cfg.model_with_offset(d)?;
            let cloud = cloud_for(&model, n, seed)?;
            let mut rows = Vec::new();
            for &method in &cfg.methods {
                let r = cfg.radius(method, n, &model);
                let row = row_for(key, method, Some(r));
                let op = operator_for(method);
                let s = complete_group_count(&single, op, eigen_count(cfg, 3))?;
                let e = embed(method, &cloud, r, s, &cfg.solver, seed)?;
                let cl = spectral_cluster(&truncated(&e.embedding, model.k()), model.k(), cfg.solver.kmeans_restarts, derive_seed(seed, "kmeans", 0))?;
                let refm = reference(&single, op, s, &cloud.samples, true)?;
                let al = align_to_reference(&e.eig, &refm.values, &refm.groups)?;
                let rms = (al.errors_after.iter().map(|x| x * x).sum::<f64>() / s as f64).sqrt();
                rows.push(row.at("accuracy", cl.accuracy));
                rows.push(row.at("alignment_error", rms));
                rows.push(row.at("components", e.components as f64));
                for j in 0..s {
                    rows.push(row.at(format!("eigenvalue_{}", j + 1), e.eig.normalized[j]));
                }
            }
            Ok((rows, Vec::new()))
        },
    );
    Ok(RunOutput {
        records,
        manifest: manifest(cfg, &id, reports),
        extra_csv: None,
    })
}

/// Two sweeps sharing representations: every `m` at `fixed_n`, and
/// `fixed_m` at every `n`. Labeled and test points are drawn independently
/// of the representation cloud.
pub fn run_downstream(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let id = run_id(cfg);
    let model = cfg.build_model()?;
    let ds = &cfg.downstream;
    let pattern = LabelPattern::parse(&ds.pattern)?;
    let mut ns: Vec<usize> = cfg.n.clone();
    ns.push(ds.fixed_n);
    let ns = sorted_n(&ns);
    let seeds = sorted_seeds(&cfg.seeds);
    let mut cells = Vec::new();
    for &n in &ns {
        let mut ms = Vec::new();
        if n == ds.fixed_n {
            ms.extend(cfg.m.iter().copied());
        }
        if cfg.n.contains(&n) {
            ms.push(ds.fixed_m);
        }
        ms.sort_unstable();
        ms.dedup();
        for &s in &seeds {
            cells.push((format!("n={n} seed={s}"), (n, s, ms.clone())));
        }
    }
    let row_for = |n: usize, seed: u64, method: MethodId, m: Option<usize>, r: Option<f64>| Row {
        id: &id,
        kind: cfg.kind,
        method: method.name().into(),
        n,
        m,
        delta: None,
        r,
        seed,
    };
    let (records, reports, table) = run_cells(
        &cells,
        |(n, s, _)| row_for(*n, *s, cfg.methods[0], None, None).at("failed", 1.0),
        |(n, seed, ms)| {
            let (n, seed) = (*n, *seed);
            let cloud = cloud_for(&model, n, seed)?;
            let test = sample_cloud(&model, ds.test_size, derive_seed(seed, "test", n as u64))?;
            let mut rows = Vec::new();
            let mut table = Vec::new();
            for &method in &cfg.methods {
                let r = cfg.radius(method, n, &model);
                let k = model.k();
                let e = embed(method, &cloud, r, eigen_count(cfg, k), &cfg.solver, seed)?;
                let head = row_for(n, seed, method, None, Some(r));
                rows.push(head.at("components", e.components as f64));
                // chi_n estimate: worst per-eigenfunction squared error after alignment.
                let op = operator_for(method);
                if let Ok(refm) = reference(&model, op, e.eig.len(), &cloud.samples, false) {
                    if complete_group_count(&model, op, e.eig.len()).ok() == Some(e.eig.len()) {
                        let al = align_to_reference(&e.eig, &refm.values, &refm.groups)?;
                        let chi = al.errors_after.iter().map(|x| x * x).fold(0.0, f64::max);
                        rows.push(head.at("chi_n", chi));
                    }
                }
                for &m in ms {
                    let row = row_for(n, seed, method, Some(m), Some(r));
                    let draw = draw_labeled_set(&e.embedding, &pattern, m, derive_seed(seed, "labeled", m as u64), ds.stratify)?;
                    let fit = logistic_gd(&draw.data, ds.iterations, ds.eta)?;
                    let xi = misclassification(&fit.beta, &e.embedding, &test.samples, &pattern)?;
                    let margin = separability_margin(&draw.data);
                    rows.push(row.at("xi", xi));
                    if let Some(g) = margin {
                        rows.push(row.at("margin", g));
                    }
                    rows.push(row.at("coverage_violated", f64::from(u8::from(draw.coverage_violated))));
                    rows.push(row.at("pattern_degenerate", f64::from(u8::from(pattern.is_degenerate()))));
                    rows.push(row.at("final_loss", fit.trace.last().map_or(f64::NAN, |t| t.loss)));
                    table.push(DownstreamRow {
                        method: method.name().into(),
                        n,
                        m,
                        seed,
                        pattern: pattern.to_string(),
                        xi,
                        margin,
                        iterations: ds.iterations,
                    });
                }
            }
            Ok((rows, table))
        },
    );
    let mut bytes = Vec::new();
    write_downstream_csv(&table, &mut bytes)?;
    Ok(RunOutput {
        records,
        manifest: manifest(cfg, &id, reports),
        extra_csv: Some(("downstream.csv".into(), bytes)),
    })
}

/// Chi-square bound and simulated likelihood-ratio errors per `n`.
pub fn run_lowerbound(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let id = run_id(cfg);
    let lb = &cfg.lowerbound;
    let seeds = sorted_seeds(&cfg.seeds);
    let cells: Vec<(String, (usize, u64))> = sorted_n(&cfg.n)
        .into_iter()
        .flat_map(|n| seeds.iter().map(move |&s| (format!("n={n} seed={s}"), (n, s))))
        .collect();
    let row_for = |n: usize, seed: u64, delta: Option<f64>| Row {
        id: &id,
        kind: cfg.kind,
        method: "lr-test".into(),
        n,
        m: None,
        delta,
        r: None,
        seed,
    };
    let (records, reports, results): (_, _, Vec<LrTestResult>) = run_cells(
        &cells,
        |&(n, s)| row_for(n, s, None).at("failed", 1.0),
        |&(n, seed)| {
            let c = match lb.grid {
                Some(g) => LowerBoundConfig::new(n, lb.dim, g)?,
                None => LowerBoundConfig::scheduled(n, lb.dim)?,
            };
            let res = simulate_lr_test(&c, lb.alpha, lb.trials, seed)?;
            let row = row_for(n, seed, Some(1.0 / (3.0 * c.grid as f64)));
            let rows = vec![
                row.at("grid", c.grid as f64),
                row.at("slab_volume", c.delta()),
                row.at("chi2_bound", res.chi2_bound),
                row.at("type1", res.type1),
                row.at("type2", res.type2),
                row.at("error_sum", res.error_sum),
                row.at("error_sum_se", res.error_sum_se),
                row.at("inequality_floor", 1.0 - res.chi2_bound),
            ];
            Ok((rows, vec![res]))
        },
    );
    let mut bytes = Vec::new();
    write_lowerbound_csv(&results, &mut bytes)?;
    Ok(RunOutput {
        records,
        manifest: manifest(cfg, &id, reports),
        extra_csv: Some(("lowerbound.csv".into(), bytes)),
    })
}
