use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oia_core::{run_grids, snr_range, square_sweep, write_csv, write_csv_to, ExperimentGrid, OiaError, ResultRow};

/// Monte Carlo simulations of opportunistic interference alignment in a
/// two-link MIMO interference channel.
#[derive(Debug, Parser)]
#[command(name = "oia", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep SNR for one antenna geometry.
    Run(RunArgs),
    /// Unused primary modes vs antennas and SNR (default antennas 2..10).
    FigUnused(PresetArgs),
    /// Optimal secondary rate vs antennas and SNR (default antennas 2..10).
    FigRate(PresetArgs),
    /// Primary, uniform and optimal secondary rates (default antennas 3 and 20).
    FigCompare(PresetArgs),
}

#[derive(Debug, Args)]
struct SnrArgs {
    /// Lowest SNR in dB.
    #[arg(long, default_value_t = -20.0, allow_negative_numbers = true)]
    snr_db_min: f64,
    /// Highest SNR in dB (inclusive).
    #[arg(long, default_value_t = 40.0, allow_negative_numbers = true)]
    snr_db_max: f64,
    /// SNR step in dB.
    #[arg(long, default_value_t = 2.0)]
    snr_db_step: f64,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Trials per (antennas, SNR) cell.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Master random seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Noise variance; SNR sets p_max = sigma2 * 10^(snr/10).
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, env = "OIA_WORKERS", default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Transmit antennas per link.
    #[arg(long)]
    nt: usize,
    /// Receive antennas per link (must be >= nt).
    #[arg(long)]
    nr: usize,
    #[command(flatten)]
    snr: SnrArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct PresetArgs {
    /// Comma-separated antenna counts, nt = nr.
    #[arg(long, value_delimiter = ',')]
    antennas: Vec<usize>,
    #[command(flatten)]
    snr: SnrArgs,
    #[command(flatten)]
    common: CommonArgs,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<OiaError> for Failure {
    fn from(e: OiaError) -> Self {
        match e {
            OiaError::InvalidInput(_) | OiaError::UnsupportedGeometry { .. } => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn build_grids(command: &Command) -> Result<(Vec<ExperimentGrid>, &CommonArgs), Failure> {
    let (grids, snr, common) = match command {
        Command::Run(args) => {
            let grid = ExperimentGrid {
                nt: args.nt,
                nr: args.nr,
                snr_db_list: Vec::new(),
                trials: args.common.trials,
                sigma2: args.common.sigma2,
                master_seed: args.common.seed,
            };
            (vec![grid], &args.snr, &args.common)
        }
        Command::FigUnused(args) | Command::FigRate(args) | Command::FigCompare(args) => {
            let antennas = match (args.antennas.is_empty(), command) {
                (false, _) => args.antennas.clone(),
                (true, Command::FigCompare(_)) => vec![3, 20],
                (true, _) => (2..=10).collect(),
            };
            let grids = square_sweep(&antennas, &[], args.common.trials, args.common.sigma2, args.common.seed);
            (grids, &args.snr, &args.common)
        }
    };
    let snr_db_list = snr_range(snr.snr_db_min, snr.snr_db_max, snr.snr_db_step)?;
    let grids: Vec<ExperimentGrid> = grids
        .into_iter()
        .map(|g| ExperimentGrid { snr_db_list: snr_db_list.clone(), ..g })
        .collect();
    for g in &grids {
        g.validate()?;
    }
    Ok((grids, common))
}

fn emit(rows: &[ResultRow], out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => write_csv(rows, path).map_err(Failure::from),
        None => write_csv_to(rows, &mut io::stdout().lock()).map_err(|e| Failure::Runtime(format!("writing to stdout: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (grids, common) = build_grids(&cli.command)?;
    let rows = run_grids(&grids, common.workers)?;
    emit(&rows, common.out.as_ref())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("oia: error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("oia: error: {msg}");
            ExitCode::from(1)
        }
    }
}
