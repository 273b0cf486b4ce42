use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use super::lobpcg::sorted_eigen;
use super::*;
use crate::graph::{build_graph, build_graph_points, laplacian, KernelProfile};
use crate::manifolds::{sample_cloud, ManifoldSpec, MultiManifoldModel, Sample};
use crate::rng::stream;

fn random_lap(n: usize, r: f64, seed: u64) -> LaplacianMatrix {
    let mut rng = stream(seed, "pts", 0);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen(), rng.gen()]).collect();
    laplacian(&build_graph_points(&pts, r, KernelProfile::Indicator, 2).unwrap())
}

fn opts() -> EigenOptions {
    EigenOptions::default()
}

#[test]
fn disconnected_graph_has_indicator_null_space() {
    let mut pts: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64 * 0.01]).collect();
    pts.extend((0..60).map(|i| vec![5.0 + i as f64 * 0.01]));
    let lap = laplacian(&build_graph_points(&pts, 0.05, KernelProfile::Indicator, 1).unwrap());
    let eig = smallest_eigenpairs(&lap, 3, &opts()).unwrap();
    assert!(eig.raw[0].abs() <= 1e-10 && eig.raw[1].abs() <= 1e-10);
    assert!(eig.raw[2] > 1e-6);
    assert!(eig.iterations > 0, "block solver expected");
    // indicator of the first component lies in the span of the first two vectors
    let ind: Vec<f64> = (0..120).map(|i| if i < 60 { 1.0 } else { 0.0 }).collect();
    let n = 120.0;
    let mut proj = vec![0.0; 120];
    for c in 0..2 {
        let col = eig.vectors.column(c);
        let coef: f64 = col.iter().zip(&ind).map(|(a, b)| a * b).sum::<f64>() / n;
        for (p, v) in proj.iter_mut().zip(col.iter()) {
            *p += coef * v;
        }
    }
    assert!(empirical_error(&proj, &ind).unwrap() < 1e-8);
}

#[test]
fn path_graph_spectrum() {
    let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
    let lap = laplacian(&build_graph_points(&pts, 1.0, KernelProfile::Indicator, 1).unwrap());
    let eig = smallest_eigenpairs(&lap, 3, &opts()).unwrap();
    for (k, v) in eig.raw.iter().enumerate() {
        let closed = 2.0 * (1.0 - (PI * k as f64 / 3.0).cos());
        assert!((v - closed).abs() < 1e-12);
    }
    assert!((eig.raw[1] - 1.0).abs() < 1e-12 && (eig.raw[2] - 3.0).abs() < 1e-12);
    assert!(smallest_eigenpairs(&lap, 4, &opts()).is_err());
}

fn check_against_dense(lap: &LaplacianMatrix, s: usize, seed: u64) -> std::result::Result<(), String> {
    let n = lap.n();
    let o = EigenOptions { seed, ..opts() };
    let eig = smallest_eigenpairs(lap, s, &o).map_err(|e| e.to_string())?;
    let (dv, dvec) = sorted_eigen(lap.to_dense());
    for i in 0..s {
        if (eig.raw[i] - dv[i]).abs() > 1e-8 {
            return Err(format!("eigenvalue {i}: {} vs {}", eig.raw[i], dv[i]));
        }
        if eig.residuals[i] > o.tol {
            return Err(format!("residual {i}: {}", eig.residuals[i]));
        }
    }
    // orthonormality in L2(pi_n)
    let g = eig.vectors.tr_mul(&eig.vectors) / n as f64;
    for a in 0..s {
        for b in 0..s {
            let want = if a == b { 1.0 } else { 0.0 };
            if (g[(a, b)] - want).abs() > 1e-8 {
                return Err(format!("gram ({a},{b}) = {}", g[(a, b)]));
            }
        }
    }
    // principal angles per cluster of the dense spectrum, skipping a cluster
    // cut by the boundary at s
    let clusters = eigengap_clusters(&dv);
    let mut start = 0;
    while start < s {
        let mut end = start + 1;
        while end < n && clusters[end] == clusters[start] {
            end += 1;
        }
        if end <= s {
            let u1 = eig.vectors.columns(start, end - start) / (n as f64).sqrt();
            let u2 = dvec.columns(start, end - start);
            let sv = (u1.transpose() * u2).singular_values();
            let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min).min(1.0);
            let sin = (1.0 - smin * smin).max(0.0).sqrt();
            if sin > 1e-6 {
                return Err(format!("cluster {start}..{end}: sin angle {sin}"));
            }
        }
        start = end;
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn block_solver_matches_dense(n in 40usize..300, s in 1usize..7, r in 0.12f64..0.4, seed in 0u64..1000) {
        let lap = random_lap(n, r, seed);
        prop_assert!(n >= 3 * (2 * s).max(8) + 1);
        if let Err(e) = check_against_dense(&lap, s, seed) {
            prop_assert!(false, "{}", e);
        }
    }

    #[test]
    fn zero_multiplicity_equals_components(n in 40usize..200, r in 0.05f64..0.2, seed in 0u64..1000) {
        let lap = random_lap(n, r, seed);
        let comps = crate::graph::component_count(&crate::graph::connected_components(&lap.weights));
        let s = (comps + 1).min(n);
        let eig = smallest_eigenpairs(&lap, s, &opts()).unwrap();
        let zeros = eig.raw.iter().filter(|v| v.abs() <= 1e-10).count();
        prop_assert_eq!(zeros, comps.min(s));
    }
}

#[test]
fn weighted_kernel_graph_matches_dense() {
    let mut rng = stream(4, "w", 0);
    let pts: Vec<Vec<f64>> = (0..250).map(|_| vec![rng.gen(), rng.gen()]).collect();
    let k = KernelProfile::AimlProfile { nuisance_dim: 3 };
    let lap = laplacian(&build_graph_points(&pts, 0.2, k, 2).unwrap());
    check_against_dense(&lap, 6, 1).unwrap();
}

#[test]
fn solver_is_deterministic() {
    let lap = random_lap(200, 0.2, 3);
    let a = smallest_eigenpairs(&lap, 4, &opts()).unwrap();
    let b = smallest_eigenpairs(&lap, 4, &opts()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn non_convergence_carries_partial_result() {
    let lap = random_lap(200, 0.2, 3);
    let o = EigenOptions { max_iter: 2, ..opts() };
    match smallest_eigenpairs(&lap, 4, &o) {
        Err(crate::Error::NoConvergence { iterations, partial, .. }) => {
            assert_eq!(iterations, 2);
            assert_eq!(partial.len(), 4);
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn empirical_error_examples() {
    let theta = vec![1.0, -1.0, 1.0, -1.0];
    assert_eq!(empirical_error(&theta, &theta).unwrap(), 0.0);
    let neg: Vec<f64> = theta.iter().map(|v| -v).collect();
    assert!((empirical_error(&neg, &theta).unwrap() - 2.0).abs() < 1e-15);
    assert!(empirical_error(&theta, &theta[..3]).is_err());
    let mut rng = stream(8, "e", 0);
    let a: Vec<f64> = (0..1000).map(|_| rng.gen()).collect();
    let b: Vec<f64> = (0..1000).map(|_| rng.gen()).collect();
    let mut naive = 0.0;
    for i in 0..1000 {
        naive += (a[i] - b[i]) * (a[i] - b[i]);
    }
    naive = (naive / 1000.0).sqrt();
    assert!((empirical_error(&a, &b).unwrap() - naive).abs() < 1e-14);
}

fn fake_system(vectors: DMatrix<f64>) -> EigenSystem {
    let s = vectors.ncols();
    let lap = random_lap(5, 0.1, 0);
    EigenSystem {
        raw: vec![0.0; s],
        normalized: vec![0.0; s],
        vectors,
        residuals: vec![0.0; s],
        clusters: vec![0; s],
        iterations: 0,
        converged: true,
        norm: lap.norm,
    }
}

#[test]
fn alignment_removes_orthogonal_ambiguity() {
    let n = 400;
    let t: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
    let reference = DMatrix::from_fn(n, 3, |i, c| match c {
        0 => 1.0,
        1 => 2f64.sqrt() * t[i].cos(),
        _ => 2f64.sqrt() * t[i].sin(),
    });
    let a = 0.7f64;
    let rotated = DMatrix::from_fn(n, 3, |i, c| match c {
        0 => -1.0,
        1 => 2f64.sqrt() * (t[i] + a).cos(),
        _ => 2f64.sqrt() * (t[i] + a).sin(),
    });
    let al = align_to_reference(&fake_system(rotated), &reference, &[0, 1, 1]).unwrap();
    assert!(al.errors_before.iter().any(|e| *e > 0.5));
    assert!(al.errors_after.iter().all(|e| *e < 1e-12), "{:?}", al.errors_after);
    assert!(align_to_reference(&fake_system(reference.clone()), &reference, &[0, 1]).is_err());
    assert!(align_to_reference(&fake_system(reference.clone()), &reference, &[0, 2, 2]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn alignment_never_increases_group_error(seed in 0u64..100_000, noise in 0.0f64..2.0) {
        let mut rng = stream(seed, "al", 0);
        let n = 50;
        let reference = DMatrix::from_fn(n, 4, |_, _| rng.gen::<f64>() - 0.5);
        let u = DMatrix::from_fn(n, 4, |i, c| reference[(i, c)] + noise * (rng.gen::<f64>() - 0.5));
        let al = align_to_reference(&fake_system(u), &reference, &[0, 1, 1, 2]).unwrap();
        for (b, a) in al.group_errors_before.iter().zip(&al.group_errors_after) {
            prop_assert!(*a <= *b + 1e-12);
        }
    }
}

fn indicator_embedding(noise: f64) -> EmbeddingMatrix {
    let m = MultiManifoldModel::uniform(vec![
        ManifoldSpec::circle(1.0),
        ManifoldSpec::circle(1.0).translated(vec![3.0, 0.0]),
    ])
    .unwrap();
    let cloud = sample_cloud(&m, 300, 6).unwrap();
    let mut rng = stream(6, "noise", 0);
    let values = DMatrix::from_fn(300, 2, |i, c| {
        let on = cloud.samples[i].k == c;
        (if on { 2f64.sqrt() } else { 0.0 }) + noise * (rng.gen::<f64>() - 0.5)
    });
    EmbeddingMatrix {
        values,
        method: Method::Cml,
        r: 0.2,
        cloud,
    }
}

#[test]
fn clustering_indicator_embeddings() {
    let exact = spectral_cluster(&indicator_embedding(0.0), 2, 5, 1).unwrap();
    assert_eq!(exact.accuracy, 1.0);
    let noisy_emb = indicator_embedding(2e-3);
    let noisy = spectral_cluster(&noisy_emb, 2, 5, 1).unwrap();
    // oracle: nearest of the two true indicator centers
    let truth = noisy_emb.cloud.labels();
    let centers = [[2f64.sqrt(), 0.0], [0.0, 2f64.sqrt()]];
    let oracle: Vec<usize> = (0..300)
        .map(|i| {
            let row = noisy_emb.row(i);
            let d = |c: &[f64; 2]| (row[0] - c[0]).powi(2) + (row[1] - c[1]).powi(2);
            usize::from(d(&centers[1]) < d(&centers[0]))
        })
        .collect();
    assert_eq!(clustering_accuracy(&oracle, &truth), 1.0);
    assert_eq!(noisy.accuracy, 1.0);
}

#[test]
fn clustering_single_manifold_reports_majority_level() {
    let m = MultiManifoldModel::new(vec![ManifoldSpec::circle(1.0)], vec![1.0]).unwrap();
    let cloud = sample_cloud(&m, 200, 2).unwrap();
    let values = DMatrix::from_fn(200, 2, |i, c| if c == 0 { 1.0 } else { cloud.samples[i].phi[0].cos() });
    let emb = EmbeddingMatrix { values, method: Method::Cml, r: 0.1, cloud };
    let cl = spectral_cluster(&emb, 2, 3, 0).unwrap();
    let n1 = cl.labels.iter().filter(|&&l| l == 0).count().max(cl.labels.iter().filter(|&&l| l == 1).count());
    assert!((cl.accuracy - n1 as f64 / 200.0).abs() < 1e-15);
}

#[test]
fn hungarian_matches_brute_force() {
    fn perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(n - 1) {
            for pos in 0..n {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }
    let mut rng = stream(2, "h", 0);
    for n in 1..6 {
        for _ in 0..20 {
            let w: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen::<f64>()).collect()).collect();
            let best = perms(n)
                .iter()
                .map(|p| (0..n).map(|i| w[i][p[i]]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((hungarian_max(&w).1 - best).abs() < 1e-12);
        }
    }
}

#[test]
fn extension_examples() {
    let emb = indicator_embedding(0.0);
    let s0 = emb.cloud.samples[0].clone();
    let ext = extend_sample(&emb, &s0).unwrap();
    let want = emb.row(0);
    assert!(ext.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-8));
    // isolated training point: the ball holds only itself
    let iso = extend(&emb, &s0.x, 1e-9, KernelProfile::Indicator).unwrap();
    assert_eq!(iso, emb.row(0));
    // empty ball falls back to nearest point
    let far = extend(&emb, &[10.0, 0.0], 0.1, KernelProfile::Indicator).unwrap();
    assert!((far[1] - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn extension_equidistant_equal_rows() {
    let m = MultiManifoldModel::new(vec![ManifoldSpec::cube(vec![1.0])], vec![1.0]).unwrap();
    let cloud = crate::manifolds::PointCloud {
        samples: [0.2, 0.4]
            .iter()
            .map(|&x| Sample { x: vec![x], k: 0, phi: vec![x], psi: vec![] })
            .collect(),
        model: m,
        seed: 0,
    };
    let emb = EmbeddingMatrix {
        values: DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 0.5, -1.0]),
        method: Method::Cml,
        r: 0.15,
        cloud,
    };
    assert_eq!(extend(&emb, &[0.3], 0.15, KernelProfile::Indicator).unwrap(), vec![0.5, -1.0]);
}

#[test]
fn weight_rescaling_leaves_embedding_unchanged() {
    let m = MultiManifoldModel::uniform(vec![
        ManifoldSpec::product(ManifoldSpec::circle(0.5), ManifoldSpec::circle(0.5)).offset_copy(0.0),
        ManifoldSpec::product(ManifoldSpec::circle(0.5), ManifoldSpec::circle(0.5)).offset_copy(0.3),
    ])
    .unwrap();
    let cloud = sample_cloud(&m, 300, 1).unwrap();
    let w = crate::aiml::kernel_weights(&cloud, 0.25).unwrap();
    let lap = crate::aiml::aiml_laplacian(&w, 300);
    let scaled = LaplacianMatrix::from_weights(w.weights.scaled(10.0), lap.norm.clone());
    let (a, b) = (
        smallest_eigenpairs(&lap, 4, &opts()).unwrap(),
        smallest_eigenpairs(&scaled, 4, &opts()).unwrap(),
    );
    for c in 0..4 {
        assert!((10.0 * a.raw[c] - b.raw[c]).abs() < 1e-7);
    }
    // compare subspaces cluster by cluster, then per vector after sign fix
    let clusters = a.clusters.clone();
    assert_eq!(clusters, b.clusters);
    for c in 0..4 {
        let single = clusters.iter().filter(|&&g| g == clusters[c]).count() == 1;
        if single {
            let dot: f64 = a.vectors.column(c).dot(&b.vectors.column(c)) / 300.0;
            let sign = dot.signum();
            let diff = empirical_error(
                a.vectors.column(c).as_slice(),
                &b.vectors.column(c).iter().map(|v| v * sign).collect::<Vec<_>>(),
            )
            .unwrap();
            assert!(diff < 1e-8, "vector {c}: {diff}");
        }
    }
}

#[test]
fn csv_exports() {
    let emb = indicator_embedding(0.0);
    let mut buf = Vec::new();
    write_embedding_csv(&emb, &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("index,true_k,coord_1,coord_2\n0,"));
    let lap = random_lap(30, 0.4, 1);
    let eig = smallest_eigenpairs(&lap, 2, &opts()).unwrap();
    let mut buf = Vec::new();
    write_eigenvalues_csv(&eig, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("s,raw,normalized,residual\n1,"));
    let cloud = sample_cloud(&MultiManifoldModel::new(vec![ManifoldSpec::circle(1.0)], vec![1.0]).unwrap(), 10, 1).unwrap();
    assert!(build_graph(&cloud, 0.5, KernelProfile::Indicator).is_ok());
}
