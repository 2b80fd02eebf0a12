use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sgd_er::escape::{sweep_full, write_sweep_csv};
use sgd_er::harness::{
    compare, emit_plot_data, parse_seed_list, train_run, LandscapeSpec, Metric, RunConfig, Variant,
};
use sgd_er::landscape::{fd_gradient, max_relative_error, Landscape, MlpObjective, MultiBasin, QuadraticSaddle, Split, SyntheticDataset};
use sgd_er::{Error, Result};

#[derive(Parser)]
#[command(name = "sgd-er", version, about = "Escalating-restart SGD experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one scheduler variant for each seed.
    Run(Common),
    /// Train all scheduler variants and write a summary table.
    Compare(Common),
    /// Sweep escape times from a quadratic saddle over restart counts.
    Saddle(Common),
    /// Check analytic gradients against central finite differences.
    Gradcheck(GradArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct GradArgs {
    /// Uses the MLP benchmark landscape when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Comma-separated seed list, e.g. 1,2,3.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    budget: Option<u32>,
    #[arg(long)]
    patience: Option<u32>,
    /// Scheduler variant, overriding the config file.
    #[arg(long)]
    scheduler: Option<String>,
}

impl Overrides {
    fn apply(&self, mut cfg: RunConfig) -> Result<RunConfig> {
        if let Some(s) = &self.seed {
            cfg.seeds = parse_seed_list(s)?;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(b) = self.budget {
            cfg.budget = b;
        }
        if let Some(p) = self.patience {
            cfg.patience = p;
        }
        if let Some(s) = &self.scheduler {
            cfg.variant = s.parse()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    common.overrides.apply(RunConfig::load(&common.config)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_run(cfg: &RunConfig) -> Result<()> {
    create_dir(&cfg.out_dir)?;
    let mut records = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let rec = train_run(cfg, seed)?;
        let path = cfg.out_dir.join(format!("{}.csv", rec.label()));
        rec.write_csv(&path)?;
        let s = rec.summary();
        println!(
            "{} seed {seed}: {} epochs, {} restarts, best val loss {:.6}, best test acc {:.4} ({})",
            rec.variant, s.epochs, s.restarts, s.best_val_loss, s.best_test_acc, rec.stop
        );
        records.push(rec);
    }
    emit_plot_data(&records, &cfg.out_dir.join("plots"))?;
    if let Some(failed) = records.iter().find(|r| r.is_failed()) {
        return Err(Error::Numeric(format!("{}: {}", failed.label(), failed.stop)));
    }
    Ok(())
}

fn cmd_compare(cfg: &RunConfig) -> Result<()> {
    create_dir(&cfg.out_dir)?;
    let report = compare(cfg, &Variant::ALL, &cfg.seeds)?;
    let mut records = Vec::new();
    for v in &report.variants {
        for rec in &v.records {
            rec.write_csv(&cfg.out_dir.join(format!("{}.csv", rec.label())))?;
            records.push(rec.clone());
        }
    }
    report.write_summary(&cfg.out_dir.join("summary.csv"))?;
    if !records.is_empty() {
        emit_plot_data(&records, &cfg.out_dir.join("plots"))?;
    }
    println!("{:<10} {:>22} {:>22}", "scheduler", "best val loss", "best test acc");
    for v in &report.variants {
        match (v.aggregate(Metric::ValLoss), v.aggregate(Metric::TestAcc)) {
            (Some((lm, ls)), Some((am, as_))) => {
                println!("{:<10} {lm:>12.5} ± {ls:<7.5} {am:>12.4} ± {as_:<7.4}", v.variant.name())
            }
            _ => println!(
                "{:<10} failed: {}",
                v.variant.name(),
                v.failure.as_deref().unwrap_or("unknown")
            ),
        }
    }
    if let Some(best) = report.best(Metric::ValLoss) {
        println!("lowest mean best val loss: {best}");
    }
    Ok(())
}

fn cmd_saddle(cfg: &RunConfig) -> Result<()> {
    let saddle = cfg.saddle()?;
    let results = sweep_full(&saddle, &cfg.escape_config()?)?;
    create_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join("saddle.csv");
    write_sweep_csv(&results, &path)?;
    for r in &results {
        println!(
            "k={:<3} eta_k={:<8} bound={:<12.4} T={}",
            r.k, r.eta_k, r.bound, r.escape
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn audit<L: Landscape + ?Sized>(
    name: &str,
    landscape: &L,
    points: &[Vec<f64>],
    tolerance: f64,
) -> Result<bool> {
    let mut worst = 0.0f64;
    for theta in points {
        let (_, g) = landscape.eval(theta)?;
        let fd = fd_gradient(landscape, theta, 1e-5)?;
        worst = worst.max(max_relative_error(&g, &fd));
    }
    let ok = worst <= tolerance;
    println!(
        "{name:<12} {} points  max rel err {worst:.3e}  {}",
        points.len(),
        if ok { "ok" } else { "FAIL" }
    );
    Ok(ok)
}

fn cmd_gradcheck(args: &GradArgs) -> Result<bool> {
    let cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::benchmark(),
    };
    let cfg = args.overrides.apply(cfg)?;
    if args.points == 0 {
        return Err(Error::Config("--points must be positive".into()));
    }
    let seed = cfg.seeds[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = true;

    let (data, hidden) = match &cfg.landscape {
        LandscapeSpec::Mlp { data, hidden } => (data.clone(), *hidden),
        _ => (Default::default(), 16),
    };
    let mlp = MlpObjective::new(hidden, SyntheticDataset::generate(&data, &mut rng)?)?;
    let train = mlp.data().indices(Split::Train).to_vec();
    let batch_size = cfg.batch_size.unwrap_or(32).min(train.len());
    let mut worst = 0.0f64;
    for _ in 0..args.points {
        let theta = mlp.shape().init_params(&mut rng);
        let start = rng.random_range(0..=train.len() - batch_size);
        let batch = mlp.batch(&train[start..start + batch_size]);
        let (_, g) = batch.eval(&theta)?;
        worst = worst.max(max_relative_error(&g, &fd_gradient(&batch, &theta, 1e-5)?));
    }
    let mlp_ok = worst <= args.tolerance;
    println!(
        "{:<12} {} points  max rel err {worst:.3e}  {}",
        "mlp",
        args.points,
        if mlp_ok { "ok" } else { "FAIL" }
    );
    ok &= mlp_ok;

    let basin = MultiBasin::default_2d();
    let pts: Vec<Vec<f64>> = (0..args.points)
        .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    ok &= audit("multibasin", &basin, &pts, args.tolerance)?;

    let saddle = QuadraticSaddle::rotated_2d(1.0, -1.0, 0.3)?;
    ok &= audit("saddle", &saddle, &pts, args.tolerance)?;
    Ok(ok)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(c) => cmd_run(&load(&c)?).map(|_| true),
        Command::Compare(c) => cmd_compare(&load(&c)?).map(|_| true),
        Command::Saddle(c) => cmd_saddle(&load(&c)?).map(|_| true),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
