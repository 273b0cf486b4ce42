use proptest::prelude::*;
use std::process::Command;

use sepcap::manifolds::{
    augment, lowerbound_model, parallel_copies_model, sample_cloud, write_cloud_csv, ManifoldSpec,
    MultiManifoldModel, SignalDensity,
};

fn model_zoo(pick: usize, scale: f64) -> MultiManifoldModel {
    let circle = ManifoldSpec::circle(scale);
    let torus = ManifoldSpec::product(ManifoldSpec::circle(0.5 * scale), ManifoldSpec::circle(0.3));
    match pick % 7 {
        0 => MultiManifoldModel::uniform(vec![circle]).unwrap(),
        1 => MultiManifoldModel::uniform(vec![circle.clone(), circle.translated(vec![3.0 * scale, 0.5])]).unwrap(),
        2 => parallel_copies_model(&torus, 0.1 * scale).unwrap(),
        3 => MultiManifoldModel::uniform(vec![ManifoldSpec::torus(vec![scale, 0.5])]).unwrap(),
        4 => MultiManifoldModel::uniform(vec![ManifoldSpec::FlatCube {
            sides: vec![scale, 1.0],
            lower: Some(vec![0.2, -0.4]),
            periodic: false,
            density: SignalDensity::Tilted { amplitude: 0.5 },
        }])
        .unwrap(),
        5 => lowerbound_model(2, 3, 1 + pick % 9).unwrap(),
        _ => MultiManifoldModel::uniform(vec![ManifoldSpec::product(
            ManifoldSpec::cube(vec![scale]),
            ManifoldSpec::circle(0.2),
        )])
        .unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn latent_coordinates_reproduce_points(pick in 0usize..70, scale in 0.3f64..3.0, seed in 0u64..1000) {
        let m = model_zoo(pick, scale);
        let cloud = sample_cloud(&m, 200, seed).unwrap();
        for s in &cloud.samples {
            let x = m.components[s.k].embed(&s.phi, &s.psi);
            prop_assert_eq!(x.len(), s.x.len());
            for (a, b) in x.iter().zip(&s.x) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
        for t in 0..5 {
            let a = augment(&m, &cloud.samples[0], seed + t).unwrap();
            prop_assert_eq!(a.k, cloud.samples[0].k);
            prop_assert_eq!(&a.phi, &cloud.samples[0].phi);
        }
    }
}

#[test]
fn clouds_are_byte_identical_across_runs() {
    for pick in 0..7 {
        let m = model_zoo(pick, 1.0);
        let bytes = || {
            let mut buf = Vec::new();
            write_cloud_csv(&sample_cloud(&m, 500, 42).unwrap(), &mut buf).unwrap();
            buf
        };
        assert_eq!(bytes(), bytes());
    }
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sepcap")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn cli_exit_codes_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _) = cli(&["--quiet", "--out", out, "sample", "-n", "50"]);
    assert_eq!(code, 0);
    assert!(dir.path().join("cloud.csv").exists());
    let (code, stdout) = cli(&["--quiet", "--out", out, "cluster", "--model", "circle-copies", "--offset", "1", "-n", "400", "-r", "0.4"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.trim(), "accuracy 1");
    let (code, _) = cli(&["--quiet", "--out", out, "lowerbound", "-n", "100", "--grid", "1"]);
    assert_eq!(code, 2);
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "kind = \"convergence\"\nn = []\nmethods = [\"cml\"]\nseeds = [0]\n").unwrap();
    let (code, _) = cli(&["--quiet", "--config", cfg.to_str().unwrap(), "sweep", "convergence"]);
    assert_eq!(code, 2);
    let good = dir.path().join("tight.toml");
    std::fs::write(
        &good,
        "kind = \"lowerbound\"\nn = [200]\nmethods = []\nseeds = [0]\n[lowerbound]\ntrials = 100\n",
    )
    .unwrap();
    let (code, _) = cli(&["--quiet", "--out", out, "--config", good.to_str().unwrap(), "sweep", "lowerbound"]);
    assert_eq!(code, 0);
    let (code, _) = cli(&["--quiet", "--out", out, "embed", "-n", "300", "-r", "0.8", "--model", "circle"]);
    assert_eq!(code, 0);
}

#[test]
fn cli_sweep_survives_failing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "kind = \"convergence\"\nn = [300]\nmethods = [\"cml\"]\nseeds = [0]\n[model]\nconstruction = \"explicit\"\n[[model.components]]\nkind = \"circle\"\nradius = 1.0\n[solver]\nmax_iter = 1\ntol = 1e-300\n",
    )
    .unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _) = cli(&["--quiet", "--out", out, "--config", cfg.to_str().unwrap(), "sweep", "convergence"]);
    assert_eq!(code, 0);
    let run = std::fs::read_dir(dir.path().join("convergence")).unwrap().next().unwrap().unwrap().path();
    let manifest = std::fs::read_to_string(run.join("manifest.json")).unwrap();
    assert!(manifest.contains("did not converge"), "{manifest}");
    let records = std::fs::read_to_string(run.join("records.csv")).unwrap();
    assert!(records.contains(",failed,1"));
}
