use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sepcap::graph::write_triplets_csv;
use sepcap::harness::{
    emit_plots, read_records_csv, run_experiment, write_run, ExperimentConfig, ExperimentKind, MethodId,
};
use sepcap::lowerbound::{simulate_lr_test, write_lowerbound_csv, LowerBoundConfig};
use sepcap::manifolds::{sample_cloud, validate_regime, write_cloud_csv, ManifoldSpec, ModelDescriptor};
use sepcap::spectral::{spectral_cluster, write_eigenvalues_csv, write_embedding_csv};
use sepcap::{Error, Result};

#[derive(Parser)]
#[command(name = "sepcap", version, about = "Manifold-separation experiments with graph Laplacians and augmentation-averaged weights")]
struct Cli {
    /// Experiment configuration (TOML, or JSON when the extension is .json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Model descriptor JSON file, or one of: circle, two-circles,
    /// circle-copies, torus-copies.
    #[arg(long, default_value = "two-circles")]
    model: String,
    /// Copy offset for the *-copies models.
    #[arg(long, default_value_t = 0.5)]
    offset: f64,
    #[arg(short, long, default_value_t = 2000)]
    n: usize,
}

#[derive(Args, Clone)]
struct RadiusArgs {
    /// Neighborhood radius; overrides the schedule.
    #[arg(short, long)]
    r: Option<f64>,
    /// Schedule constant c in r = c (ln n / n)^(1/dim).
    #[arg(short, long, default_value_t = 2.0)]
    c: f64,
    /// Number of eigenpairs; defaults to the number of components.
    #[arg(short, long)]
    s: Option<usize>,
    /// Also write the weight matrix as triplets.
    #[arg(long)]
    weights: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum AimlMode {
    Kernel,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Cml,
    AimlKernel,
    AimlMc,
}

impl From<MethodArg> for MethodId {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Cml => MethodId::Cml,
            MethodArg::AimlKernel => MethodId::AimlKernel,
            MethodArg::AimlMc => MethodId::AimlMc,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a point cloud and write cloud.csv.
    Sample(ModelArgs),
    /// Radius-graph Laplacian eigenpairs.
    Embed {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        radius: RadiusArgs,
    },
    /// Augmentation-averaged Laplacian eigenpairs.
    AimlEmbed {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        radius: RadiusArgs,
        #[arg(long, value_enum, default_value = "kernel")]
        mode: AimlMode,
        #[arg(long, default_value_t = sepcap::aiml::DEFAULT_N_AUG)]
        n_aug: usize,
    },
    /// Spectral clustering with k-means on the first K eigenvectors.
    Cluster {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        radius: RadiusArgs,
        #[arg(long, value_enum, default_value = "cml")]
        method: MethodArg,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
    },
    /// Downstream logistic-regression sweep (config kind downstream).
    Downstream,
    /// Chi-square bound and likelihood-ratio simulation for one instance.
    Lowerbound {
        #[arg(short, long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Grid count M; defaults to ceil((2n / ln n)^(1/dim)).
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Run a sweep from --config, or the built-in preset for the kind.
    Sweep {
        #[arg(value_parser = parse_kind)]
        kind: ExperimentKind,
    },
    /// Render SVG plots from a records.csv.
    Plot {
        records: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: ExperimentKind,
    },
}

fn parse_kind(s: &str) -> std::result::Result<ExperimentKind, String> {
    ExperimentKind::parse(s).map_err(|e| e.to_string())
}

fn descriptor(args: &ModelArgs) -> Result<ModelDescriptor> {
    let circle = ManifoldSpec::circle(1.0);
    let torus = ManifoldSpec::product(ManifoldSpec::circle(0.5), ManifoldSpec::circle(0.5));
    Ok(match args.model.as_str() {
        "circle" => ModelDescriptor::Explicit {
            components: vec![circle],
            weights: None,
        },
        "two-circles" => ModelDescriptor::Explicit {
            components: vec![circle.clone(), circle.translated(vec![3.0, 0.0])],
            weights: None,
        },
        "circle-copies" => ModelDescriptor::ParallelCopies {
            base: circle,
            offset: args.offset,
        },
        "torus-copies" => ModelDescriptor::ParallelCopies {
            base: torus,
            offset: args.offset,
        },
        path => ModelDescriptor::from_json(&std::fs::read_to_string(path)?)?,
    })
}

struct Ctx {
    seed: u64,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>> {
        std::fs::create_dir_all(&self.out)?;
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }
}

fn spectral_run(ctx: &Ctx, model: &ModelArgs, radius: &RadiusArgs, method: MethodId, n_aug: usize) -> Result<()> {
    let m = descriptor(model)?.build()?;
    let cloud = sample_cloud(&m, model.n, ctx.seed)?;
    let dim = if method.is_aiml() { m.signal_dim() } else { m.dim() };
    let r = radius
        .r
        .unwrap_or_else(|| sepcap::harness::radius_schedule(radius.c, model.n, dim));
    let regime = validate_regime(&m, r, model.n);
    if !regime.radius_ok {
        ctx.say(format!("warning: r = {r} exceeds half the radius cap {}", regime.radius_cap));
    }
    let mut solver = sepcap::harness::SolverSettings::default();
    solver.n_aug = n_aug;
    let s = radius.s.unwrap_or(m.k());
    let e = sepcap::harness::embed(method, &cloud, r, s, &solver, ctx.seed)?;
    if radius.weights {
        let lap = sepcap::harness::build_laplacian(method, &cloud, r, &solver, ctx.seed)?;
        write_triplets_csv(&lap.weights, method.is_aiml().then_some(method.name()), ctx.file("weights.csv")?)?;
    }
    write_cloud_csv(&cloud, ctx.file("cloud.csv")?)?;
    write_eigenvalues_csv(&e.eig, ctx.file("eigenvalues.csv")?)?;
    write_embedding_csv(&e.embedding, ctx.file("embedding.csv")?)?;
    ctx.say(format!(
        "{}: n = {}, r = {r:.5}, components = {}, normalized eigenvalues = {:?}",
        method.name(),
        model.n,
        e.components,
        e.eig.normalized
    ));
    Ok(())
}

fn load_config(cli: &Cli, kind: ExperimentKind) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::preset(kind),
    };
    if cfg.kind != kind {
        return Err(Error::Config(format!(
            "config describes a {} run, not {}",
            cfg.kind.name(),
            kind.name()
        )));
    }
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    Ok(cfg)
}

fn sweep(cli: &Cli, ctx: &Ctx, kind: ExperimentKind) -> Result<()> {
    let cfg = load_config(cli, kind)?;
    let out = cli.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let result = run_experiment(&cfg)?;
    let dir = write_run(&result, &out)?;
    let failed = result.manifest.cells.iter().filter(|c| c.error.is_some()).count();
    ctx.say(format!(
        "{} run {}: {} records, {} cells ({} failed) -> {}",
        kind.name(),
        result.manifest.manifest_id,
        result.records.len(),
        result.manifest.cells.len(),
        failed,
        dir.display()
    ));
    Ok(())
}

fn plot(ctx: &Ctx, records: &Path, kind: ExperimentKind, out: Option<&Path>) -> Result<()> {
    let rows = read_records_csv(records)?;
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| records.parent().map(Path::to_path_buf).unwrap_or_default());
    std::fs::create_dir_all(&dir)?;
    for (name, svg) in emit_plots(&rows, kind)? {
        std::fs::write(dir.join(&name), svg)?;
        ctx.say(format!("wrote {}", dir.join(name).display()));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let ctx = Ctx {
        seed: cli.seed.unwrap_or(0),
        out: cli.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Sample(args) => {
            let m = descriptor(args)?.build()?;
            let cloud = sample_cloud(&m, args.n, ctx.seed)?;
            write_cloud_csv(&cloud, ctx.file("cloud.csv")?)?;
            ctx.say(format!("wrote {} samples to {}", args.n, ctx.out.join("cloud.csv").display()));
            Ok(())
        }
        Command::Embed { model, radius } => spectral_run(&ctx, model, radius, MethodId::Cml, 0),
        Command::AimlEmbed {
            model,
            radius,
            mode,
            n_aug,
        } => {
            let method = match mode {
                AimlMode::Kernel => MethodId::AimlKernel,
                AimlMode::Mc => MethodId::AimlMc,
            };
            spectral_run(&ctx, model, radius, method, *n_aug)
        }
        Command::Cluster {
            model,
            radius,
            method,
            restarts,
        } => {
            let method = MethodId::from(*method);
            let m = descriptor(model)?.build()?;
            let cloud = sample_cloud(&m, model.n, ctx.seed)?;
            let dim = if method.is_aiml() { m.signal_dim() } else { m.dim() };
            let r = radius
                .r
                .unwrap_or_else(|| sepcap::harness::radius_schedule(radius.c, model.n, dim));
            let solver = sepcap::harness::SolverSettings::default();
            let e = sepcap::harness::embed(method, &cloud, r, radius.s.unwrap_or(m.k()), &solver, ctx.seed)?;
            let cl = spectral_cluster(&e.embedding, m.k(), *restarts, ctx.seed)?;
            let mut w = csv::Writer::from_writer(ctx.file("clusters.csv")?);
            w.write_record(["index", "true_k", "cluster"])?;
            for (i, (s, l)) in cloud.samples.iter().zip(&cl.labels).enumerate() {
                w.write_record([i.to_string(), (s.k + 1).to_string(), (l + 1).to_string()])?;
            }
            w.flush()?;
            println!("accuracy {}", cl.accuracy);
            Ok(())
        }
        Command::Downstream => sweep(cli, &ctx, ExperimentKind::Downstream),
        Command::Lowerbound {
            n,
            dim,
            grid,
            alpha,
            trials,
        } => {
            let cfg = match grid {
                Some(g) => LowerBoundConfig::new(*n, *dim, *g)?,
                None => LowerBoundConfig::scheduled(*n, *dim)?,
            };
            let res = simulate_lr_test(&cfg, *alpha, *trials, ctx.seed)?;
            write_lowerbound_csv(std::slice::from_ref(&res), ctx.file("lowerbound.csv")?)?;
            println!(
                "M = {}, chi2 bound = {:.6e}, error sum = {:.4} (se {:.4}), floor 1 - chi2 = {:.4}",
                cfg.grid,
                res.chi2_bound,
                res.error_sum,
                res.error_sum_se,
                1.0 - res.chi2_bound
            );
            Ok(())
        }
        Command::Sweep { kind } => sweep(cli, &ctx, *kind),
        Command::Plot { records, kind } => plot(&ctx, records, *kind, cli.out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
