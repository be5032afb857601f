use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flatopt_cli::commands::{self, output_dir};
use flatopt_cli::metrics::METRICS_FIELDS;
use flatopt_cli::{CliError, ExperimentConfig, Result};

const AFTER_HELP: &str = "Exit codes: 0 success, 2 config or validation error, 3 numeric failure, 4 I/O failure.";

#[derive(Parser)]
#[command(name = "flatopt", version, about = "Sharpness-aware optimizer experiments", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (`key = value` lines)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's `output`, else ./flatopt-out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate every N steps (default: once per epoch)
    #[arg(long)]
    eval_every: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train once; writes metrics.jsonl and summary.json
    #[command(after_help = format!("metrics.jsonl fields: {METRICS_FIELDS}"))]
    Run(Common),
    /// One run per Cartesian grid cell; writes cell_NNN/ and aggregate.csv
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `key=v1,v2,...`; repeat for more axes
        #[arg(long = "grid", required = true)]
        grid: Vec<String>,
        /// Concurrent cells (FLATOPT_THREADS overrides)
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Full-SAM run recording g_s, g_h, g_v differences k steps apart
    Probe {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        k: u64,
    },
    /// Evaluate the PAC-Bayes bound and print each term
    Bound {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        dim: u64,
        #[arg(long)]
        w_norm_sq: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 0.0)]
        rho0: f64,
    },
    /// Compare analytic gradients with central differences at 10 seeded points
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(path: &Path, seed: Option<u64>, eval_every: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg = cfg.with_override("seed", &s.to_string())?;
    }
    if let Some(e) = eval_every {
        cfg = cfg.with_override("train.eval_every", &e.to_string())?;
    }
    Ok(cfg)
}

fn parse_grid(specs: &[String]) -> Result<Vec<(String, Vec<String>)>> {
    specs
        .iter()
        .map(|s| {
            let (k, v) =
                s.split_once('=').ok_or_else(|| CliError::Invalid(format!("grid `{s}`: expected key=v1,v2")))?;
            let values: Vec<String> = v.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect();
            Ok((k.trim().to_string(), values))
        })
        .collect()
}

fn jobs(flag: usize) -> Result<usize> {
    match std::env::var("FLATOPT_THREADS") {
        Ok(v) => v.parse().map_err(|_| CliError::Invalid(format!("FLATOPT_THREADS: cannot parse `{v}`"))),
        Err(_) => Ok(flag),
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(c) => {
            let cfg = load(&c.config, c.seed, c.eval_every)?;
            let out = output_dir(&cfg, c.out.as_deref());
            let result = commands::run(&cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&result.summary).expect("summary serializes"));
        }
        Command::Sweep { common: c, grid, jobs: j } => {
            let cfg = load(&c.config, c.seed, c.eval_every)?;
            let out = output_dir(&cfg, c.out.as_deref());
            let rows = commands::sweep(&cfg, &parse_grid(&grid)?, &out, jobs(j)?)?;
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            println!("{} cells, {failed} failed; aggregate at {}", rows.len(), out.join("aggregate.csv").display());
        }
        Command::Probe { common: c, k } => {
            let cfg = load(&c.config, c.seed, c.eval_every)?;
            let out = output_dir(&cfg, c.out.as_deref());
            let p = commands::probe(&cfg, k, &out)?;
            println!(
                "{} rows; mean normalized differences: g_s {}, g_h {}, g_v {}",
                p.rows.len(),
                p.mean_norm_d_gs(),
                p.mean_norm_d_gh(),
                p.mean_norm_d_gv()
            );
        }
        Command::Bound { n, delta, dim, w_norm_sq, rho, rho0 } => {
            let (_, text) = commands::bound(n, delta, dim, w_norm_sq, rho, rho0)?;
            print!("{text}");
        }
        Command::Check { config, seed } => {
            let cfg = load(&config, seed, None)?;
            let report = commands::check(&cfg)?;
            println!("max relative error: {:e}", report.max_rel_error);
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("gradient check failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
