use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use jumpreach_cli::{run, ExperimentConfig, OUT_DIR_ENV};

/// Run a jumpreach experiment described by a TOML config.
///
/// Exit status: 0 success or feasible, 1 error, 2 infeasible,
/// 3 certificate verification failed.
#[derive(Debug, Parser)]
#[command(name = "jumpreach", version)]
struct Args {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (default: `out`; the JUMPREACH_OUT_DIR variable wins).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut cfg = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(p) = cfg.plan.certificate.as_mut() {
        if p.is_relative() {
            if let Some(dir) = args.config.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    if args.print_config {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    let out = std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .or(args.out)
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = args.workers {
        pool = pool.num_threads(w.max(1));
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cfg, &out)) {
        Ok(o) => {
            print!("{}", o.stdout);
            println!("status: {:?}; report: {}", o.report.status, out.join("report.json").display());
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
