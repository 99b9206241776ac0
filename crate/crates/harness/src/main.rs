use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heatlab::experiment::default_out_dir;
use heatlab::{run_experiment, ExperimentKind, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "heatlab",
    version,
    about = "Radial experiments for the focusing energy-critical heat equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single evolution (`simulate` or `decay` configs).
    Simulate(Common),
    /// Amplitude bisection between decay and blow-up.
    Threshold(Common),
    /// Convexity functionals and refined criterion on a blow-up run.
    Levine(Common),
    /// Below-threshold sweep over amplitudes.
    DecaySuite(Common),
    /// Linear heat-flow decay exponents.
    HeatCheck(Common),
    /// Two-bubble decoupling and modulation tracking.
    Bubbles(Common),
    /// Grid and tolerance refinement study.
    Convergence(Common),
    /// Whatever experiment the config names.
    Run(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default `out/<experiment>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent simulations in suites.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long = "grid-N")]
    grid_n: Option<usize>,
    #[arg(long)]
    rmax: Option<f64>,
    #[arg(long)]
    tfinal: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, c) = match cli.command {
        Command::Simulate(c) => (Some(ExperimentKind::Simulate), c),
        Command::Threshold(c) => (Some(ExperimentKind::Threshold), c),
        Command::Levine(c) => (Some(ExperimentKind::Levine), c),
        Command::DecaySuite(c) => (Some(ExperimentKind::DecaySuite), c),
        Command::HeatCheck(c) => (Some(ExperimentKind::HeatCheck), c),
        Command::Bubbles(c) => (Some(ExperimentKind::Bubbles), c),
        Command::Convergence(c) => (Some(ExperimentKind::Convergence), c),
        Command::Run(c) => (None, c),
    };
    let overrides = Overrides {
        experiment: kind,
        grid_n: c.grid_n,
        r_max: c.rmax,
        t_final: c.tfinal,
    };
    let out = match c.out {
        Some(o) => o,
        None => match RunConfig::from_path(&c.config) {
            Ok(cfg) => default_out_dir(cfg.experiment),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
    };
    match run_experiment(&c.config, &out, &overrides, c.workers) {
        Ok(()) => {
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
