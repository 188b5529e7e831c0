//! `evolflow`: experiments on the evolution of time-dependent vector fields.
//!
//! Exit codes: 0 success, 1 configuration error, 2 solver error (details in
//! `diagnostics.json`), 3 a declared check failed.

// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;
mod properties;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{Ctx, Failure};
use config::Config;

#[derive(Parser)]
#[command(name = "evolflow", version, about = "Evolution of time-dependent vector fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Draw the deformed grid of the first instance as SVG.
    #[arg(long, global = true)]
    render: bool,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Evolve compactly supported velocities and compare with RK4.
    Evolve,
    /// Distances between Evol(γ + 2^-k δ) and Evol(γ).
    ContinuityStudy,
    /// Contraction budgets of the n-fold subdivision.
    SubdivisionStudy,
    /// Randomized algebraic and calculus checks.
    PropertyCheck,
    /// Evolve periodic velocities on the flat torus.
    TorusEvolve,
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    command: &'a str,
    error: String,
    chain: Vec<String>,
}

fn name(c: Command) -> &'static str {
    match c {
        Command::Evolve => "evolve",
        Command::ContinuityStudy => "continuity-study",
        Command::SubdivisionStudy => "subdivision-study",
        Command::PropertyCheck => "property-check",
        Command::TorusEvolve => "torus-evolve",
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config(anyhow::anyhow!("--config is required")))?;
    let cfg = Config::load(path).map_err(Failure::Config)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| Failure::Config(e.into()))?;
    let ctx = Ctx {
        out: cli.out.clone(),
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        render: cli.render,
        verbose: cli.verbose,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.max(1))
        .build()
        .map_err(|e| Failure::Config(e.into()))?;
    pool.install(|| match cli.command {
        Command::Evolve => commands::evolve_cmd(&cfg, &ctx),
        Command::ContinuityStudy => commands::continuity_cmd(&cfg, &ctx),
        Command::SubdivisionStudy => commands::subdivision_cmd(&cfg, &ctx),
        Command::PropertyCheck => commands::property_cmd(&cfg, &ctx),
        Command::TorusEvolve => commands::torus_cmd(&cfg, &ctx),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver error: {e:#}");
            let diag = Diagnostics {
                command: name(cli.command),
                error: e.to_string(),
                chain: e.chain().skip(1).map(ToString::to_string).collect(),
            };
            let _ = std::fs::create_dir_all(&cli.out);
            if let Ok(text) = serde_json::to_string_pretty(&diag) {
                let _ = std::fs::write(cli.out.join("diagnostics.json"), text);
            }
            ExitCode::from(2)
        }
        Err(Failure::Checks(failed)) => {
            for f in &failed {
                eprintln!("check failed: {f}");
            }
            ExitCode::from(3)
        }
    }
}
