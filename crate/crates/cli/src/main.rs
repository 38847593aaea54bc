use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use hallmhd::runner::{execute, RunConfig, RunSummary};

/// Dual-field mixed finite element solver for incompressible Hall MHD.
#[derive(Parser)]
#[command(name = "hallmhd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (single simulation, or the whole sweep of a convergence scenario).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a configuration value, e.g. `--set params.dt=0.05` (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run a convergence sweep and report fitted orders.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn report(summary: &RunSummary) {
    if let Some(last) = summary.records.last() {
        println!(
            "{} iterations, final t = {}, total energy = {:.12e}, max energy-law residual = {:.3e}",
            summary.records.len(),
            last.t,
            last.total,
            summary.records.iter().map(|r| r.energy_law_residual).fold(0.0, f64::max)
        );
    }
    for r in &summary.reports {
        let errs: Vec<String> = r.errors.iter().map(|(v, e)| format!("{}={e:.4e}", v.name())).collect();
        println!("N={} K={} dt={}: {}", r.degree, r.elements, r.dt, errs.join(" "));
    }
    for (v, o) in &summary.orders {
        let reference = summary.reference_orders.iter().find(|(w, _)| w == v);
        match reference {
            Some((_, r)) => println!("order {:>5}: {o:.3} (interpolation {r:.3})", v.name()),
            None => println!("order {:>5}: {o:.3}", v.name()),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let (config, set, sweep) = match cli.command {
        Command::Run { config, set } => (config, set, false),
        Command::Sweep { config, set } => (config, set, true),
    };
    let cfg = RunConfig::from_file(&config, &set).with_context(|| format!("loading {}", config.display()))?;
    if sweep && !cfg.scenario.is_sweep() {
        bail!("`sweep` needs scenario temporal_convergence or spatial_convergence");
    }
    let summary = execute(&cfg).context("run failed")?;
    report(&summary);
    println!("outputs written to {}", cfg.output.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
