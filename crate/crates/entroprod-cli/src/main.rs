//! Command-line front end: parameter sweeps, figure-data presets, and
//! invariant check suites.

mod checks;
mod presets;
mod spec;
mod sweep;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use spec::{OutputFormat, SweepSpec};

/// Thread-count override; takes precedence over --threads.
const THREADS_ENV: &str = "ENTROPROD_THREADS";

#[derive(Parser)]
#[command(
    name = "entroprod",
    version,
    about = "Entropy production splittings for unitary work protocols"
)]
struct Cli {
    /// Worker threads for sweep evaluation (env ENTROPROD_THREADS overrides)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Gauss-Legendre order for TFIM momentum integrals
    #[arg(long, global = true, default_value_t = entroprod::tfim::DEFAULT_QUAD_NODES)]
    quad_nodes: usize,

    /// Seed for randomized check suites (recorded in the manifest)
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep described by a TOML config file
    Sweep {
        /// Path of the sweep config
        config: PathBuf,
        /// Output file (default: sweep.csv / sweep.json)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's output format
        #[arg(long)]
        format: Option<String>,
    },
    /// Reproduce a figure dataset (fig1..fig6)
    Preset {
        name: String,
        /// Output file (default: <name>.csv)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run invariant check suites; nonzero exit on any failure
    Check {
        /// Suite selector (operator-algebra, splitting, trajectories,
        /// perturbation, tfim, negative-control, all)
        #[arg(long, default_value = "all")]
        suite: String,
        /// Emit the report as JSON instead of text lines
        #[arg(long)]
        json: bool,
    },
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let from_env = std::env::var(THREADS_ENV)
        .ok()
        .map(|v| v.parse::<usize>().context("bad ENTROPROD_THREADS value"))
        .transpose()?;
    if let Some(n) = from_env.or(flag) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("failed to configure the worker pool")?;
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Sweep { config, out, format } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("cannot read config {}", config.display()))?;
            let mut spec = SweepSpec::from_toml(&text)?;
            if let Some(f) = format {
                spec.format = match f.as_str() {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    other => anyhow::bail!("unknown format `{other}` (csv or json)"),
                };
            }
            let default_name = match spec.format {
                OutputFormat::Csv => "sweep.csv",
                OutputFormat::Json => "sweep.json",
            };
            let path = out.unwrap_or_else(|| PathBuf::from(default_name));
            let started = Instant::now();
            let data = sweep::run_sweep(&spec, cli.quad_nodes)?;
            let written = sweep::emit(&spec, &data, &path, cli.seed, started)?;
            for p in written {
                println!("wrote {}", p.display());
            }
        }
        Command::Preset { name, out } => {
            let path = out.unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
            let written = presets::run_preset(&name, &path, cli.quad_nodes, cli.seed)?;
            for p in written {
                println!("wrote {}", p.display());
            }
        }
        Command::Check { suite, json } => {
            let results = checks::run_suite(&suite, cli.seed)?;
            let failed = results.iter().filter(|r| !r.pass).count();
            if json {
                println!("{}", serde_json::to_string_pretty(&results)?);
            } else {
                for r in &results {
                    let status = if r.pass { "PASS" } else { "FAIL" };
                    println!("{status} {} — {}", r.id, r.detail);
                }
                println!(
                    "{} checks, {} failed (suite `{suite}`, seed {})",
                    results.len(),
                    failed,
                    cli.seed
                );
            }
            if failed > 0 {
                std::process::exit(1);
            }
        }
    }
    Ok(())
}
