use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use twinbeam::gainfit::Weighting;

mod commands;

/// Twin-beam noise-reduction-factor simulator.
#[derive(Debug, Parser)]
#[command(name = "twinbeam", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form NRF and its breakdown for a config file (JSON out).
    Predict {
        #[command(flatten)]
        io: Io,
    },
    /// Monte Carlo run plus estimate (JSON summary out, optional records CSV).
    Simulate {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        run: Run,
        /// Write the per-pulse records as CSV with columns n1,n2.
        #[arg(long, value_name = "PATH")]
        records: Option<PathBuf>,
    },
    /// Fit the gain coefficient to output photon numbers (JSON out).
    Fit {
        /// CSV with header `power,photons` and an optional `weight` column.
        #[arg(long, value_name = "CSV")]
        points: PathBuf,
        /// Number of modes `m` in `N = m·sinh²(c·√P) + b·P`.
        #[arg(long)]
        modes: u64,
        /// Background slope `b`, photons per pump-power unit.
        #[arg(long, default_value_t = 0.0)]
        background_slope: f64,
        #[arg(long, value_enum, default_value_t = WeightingArg::Uniform)]
        weighting: WeightingArg,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Parameter sweep from a scenario file (CSV out).
    Scenario {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        run: Run,
    },
}

#[derive(Debug, Args)]
struct Io {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Defaults to stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Run {
    /// Pulses to simulate (per grid point for scenarios).
    #[arg(long)]
    pulses: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Keep electronic noise in the variance instead of subtracting σ₁² + σ₂².
    #[arg(long)]
    no_noise_subtraction: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WeightingArg {
    Uniform,
    InversePhotons,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Uniform => Weighting::Uniform,
            WeightingArg::InversePhotons => Weighting::InversePhotons,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Predict { io } => commands::predict(&io.config, io.out.as_deref()),
        Command::Simulate { io, run, records } => commands::simulate(
            &io.config,
            io.out.as_deref(),
            records.as_deref(),
            commands::RunFlags::from(&run),
        ),
        Command::Fit {
            points,
            modes,
            background_slope,
            weighting,
            out,
        } => commands::fit(
            &points,
            modes,
            background_slope,
            weighting.into(),
            out.as_deref(),
        ),
        Command::Scenario { io, run } => commands::scenario(
            &io.config,
            io.out.as_deref(),
            commands::RunFlags::from(&run),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("twinbeam: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

impl From<&Run> for commands::RunFlags {
    fn from(run: &Run) -> Self {
        Self {
            pulses: run.pulses,
            seed: run.seed,
            workers: run.workers,
            subtract_noise: !run.no_noise_subtraction,
        }
    }
}
