use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use srrw::config::ExperimentConfig;
use srrw::runner;

#[derive(Parser)]
#[command(name = "srrw", version, about = "Self-regulating random walks on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides `simulation.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `simulation.replicas`.
    #[arg(long)]
    replicas: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary law, spectral gap and mixing times.
    Stationary(Common),
    /// Return-time envelope constants.
    Envelopes(Common),
    /// Population traces.
    Simulate(Common),
    /// Feasibility conditions against a simulation.
    Check(Common),
    /// Feasibility over a parameter grid.
    Sweep(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("SRRW_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: SRRW_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(1);
            }
        }
    }
    let (cmd, common) = match &cli.command {
        Command::Stationary(c) => ("stationary", c),
        Command::Envelopes(c) => ("envelopes", c),
        Command::Simulate(c) => ("simulate", c),
        Command::Check(c) => ("check", c),
        Command::Sweep(c) => ("sweep", c),
    };
    let result = ExperimentConfig::load(&common.config).and_then(|mut cfg| {
        if let Some(s) = common.seed {
            cfg.simulation.seed = s;
        }
        if let Some(r) = common.replicas {
            cfg.simulation.replicas = r;
        }
        match cmd {
            "stationary" => runner::cmd_stationary(&cfg, &common.out),
            "envelopes" => runner::cmd_envelopes(&cfg, &common.out),
            "simulate" => runner::cmd_simulate(&cfg, &common.out),
            "check" => runner::cmd_check(&cfg, &common.out),
            _ => runner::validate_sweep(&cfg).and_then(|_| runner::cmd_sweep(&cfg, &common.out)),
        }
    });
    match result {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
