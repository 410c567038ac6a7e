//! Benchmark CLI for differentially private sparse covariance estimation.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 when the run
//! completed but some trials failed numerically.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpcov::datagen::{generate_model, DEFAULT_LAMBDA, DEFAULT_SCALE_DIVISOR};
use dpcov::EstimatorRegistry;
use dpcov_bench::config::{PartialConfig, Sweep};
use dpcov_bench::output::{emit_results, EmitOptions};
use dpcov_bench::runner::{run_experiment, RunResult};

const OUT_DIR_ENV: &str = "DPCOV_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "dpcov-bench",
    version,
    about = "Benchmark runner for differentially private sparse covariance estimators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write trials.csv, summary.csv and plot data.
    Run(Box<RunArgs>),
    /// Generate a ground-truth covariance and export it with metadata.
    GenModel(GenModelArgs),
    /// List the registered estimation algorithms.
    ListAlgorithms,
}

#[derive(Args)]
struct RunArgs {
    /// Flat TOML config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,

    /// sparsity-sweep, dimension-sweep, epsilon-sweep or custom.
    #[arg(long)]
    setting: Option<String>,

    /// Estimator name from the registry (central, local, naive).
    #[arg(long)]
    algorithm: Option<String>,

    #[arg(long)]
    p: Option<usize>,

    #[arg(long)]
    sr: Option<f64>,

    #[arg(long)]
    epsilon: Option<f64>,

    /// Fixed delta; the default rule is delta = 1/n.
    #[arg(long)]
    delta: Option<f64>,

    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,

    #[arg(long)]
    trials: Option<usize>,

    #[arg(long)]
    gamma: Option<f64>,

    #[arg(long)]
    master_seed: Option<u64>,

    /// threshold-all or exempt-diagonal.
    #[arg(long)]
    diagonal_policy: Option<String>,

    /// Project sample rows onto the unit ball before estimation.
    #[arg(long)]
    clip_norm: bool,

    #[arg(long)]
    lambda: Option<f64>,

    /// The scale divisor c in U = (base + lambda I)/c.
    #[arg(long)]
    scale_divisor: Option<f64>,

    #[arg(long)]
    sensitivity_multiplier: Option<f64>,

    /// Test mode: force the noise scale (0 disables noise).
    #[arg(long)]
    force_sigma: Option<f64>,

    /// Test mode: force the threshold.
    #[arg(long)]
    force_threshold: Option<f64>,

    /// Worker threads for trial execution.
    #[arg(long)]
    workers: Option<usize>,

    /// Output directory (default: $DPCOV_OUT_DIR, then ./results).
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Also render an SVG chart of the l2 error against n.
    #[arg(long)]
    svg: bool,
}

impl RunArgs {
    fn to_partial(&self) -> PartialConfig {
        PartialConfig {
            setting: self.setting.clone(),
            algorithm: self.algorithm.clone(),
            p: self.p.map(Sweep::One),
            sr: self.sr.map(Sweep::One),
            epsilon: self.epsilon.map(Sweep::One),
            delta: self.delta,
            delta_rule: None,
            n_grid: self.n_grid.clone(),
            trials: self.trials,
            gamma: self.gamma,
            master_seed: self.master_seed,
            diagonal_policy: self.diagonal_policy.clone(),
            clip_norm: if self.clip_norm { Some(true) } else { None },
            lambda: self.lambda,
            scale_divisor: self.scale_divisor,
            sensitivity_multiplier: self.sensitivity_multiplier,
            force_sigma: self.force_sigma,
            force_threshold: self.force_threshold,
            workers: self.workers,
        }
    }
}

#[derive(Args)]
struct GenModelArgs {
    #[arg(long)]
    p: usize,

    #[arg(long)]
    sr: f64,

    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,

    /// The scale divisor c.
    #[arg(long, default_value_t = DEFAULT_SCALE_DIVISOR)]
    c: f64,

    #[arg(long)]
    seed: u64,

    /// Output directory (default: $DPCOV_OUT_DIR, then ./results).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn print_summary(result: &RunResult) {
    println!(
        "{:>6} {:>5} {:>8} {:>6} {:>5}/{:<5} {:>12} {:>12} {:>12}",
        "sr", "p", "epsilon", "n", "ok", "fail", "mean_l1", "mean_l2", "mean_linf"
    );
    for s in &result.summary {
        let f = |v: Option<f64>| v.map(|v| format!("{v:.5}")).unwrap_or_else(|| "-".into());
        println!(
            "{:>6} {:>5} {:>8} {:>6} {:>5}/{:<5} {:>12} {:>12} {:>12}",
            s.sr,
            s.p,
            s.epsilon,
            s.n,
            s.completed,
            s.failed,
            f(s.mean_rel_err_l1),
            f(s.mean_rel_err_l2),
            f(s.mean_rel_err_linf),
        );
    }
}

fn cmd_run(args: &RunArgs) -> ExitCode {
    let file = match &args.config {
        Some(path) => match PartialConfig::from_toml_file(path) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        },
        None => PartialConfig::default(),
    };
    let cfg = match args.to_partial().merged_over(file).resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    let registry = EstimatorRegistry::builtin();
    let result = match run_experiment(&cfg, &registry) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    for violation in &result.invariant_violations {
        eprintln!("invariant violation: {violation}");
    }

    let out_dir = resolve_out_dir(args.out_dir.clone());
    let files = match emit_results(&cfg, &result, &out_dir, &EmitOptions { svg: args.svg }) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    print_summary(&result);
    println!("\nwrote {}", files.trials.display());
    println!("wrote {}", files.summary.display());
    for s in &files.series {
        println!("wrote {}", s.display());
    }
    if let Some(svg) = &files.svg {
        println!("wrote {}", svg.display());
    }

    let failed = result.failed_trials();
    if failed > 0 {
        eprintln!("{failed} trial(s) failed; see rows marked failed in trials.csv");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}

fn cmd_gen_model(args: &GenModelArgs) -> ExitCode {
    let out_dir = resolve_out_dir(args.out_dir.clone());
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: create {}: {e}", out_dir.display());
        return ExitCode::from(1);
    }
    let model = match generate_model(args.p, args.sr, args.lambda, args.c, args.seed) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let matrix_path = out_dir.join("model.csv");
    let meta_path = out_dir.join("model.meta.json");
    if let Err(e) = model.write_files(&matrix_path, &meta_path) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    println!("wrote {}", matrix_path.display());
    println!("wrote {}", meta_path.display());
    println!("min eigenvalue: {}", model.min_eigenvalue());
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not config errors.
            if e.use_stderr() {
                let _ = e.print();
                return ExitCode::from(1);
            }
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::GenModel(args) => cmd_gen_model(&args),
        Command::ListAlgorithms => {
            for name in EstimatorRegistry::builtin().names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
    }
}
