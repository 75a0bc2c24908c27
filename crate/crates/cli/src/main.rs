//! `hmb` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hmb_core::codebook::RingAxis;
use hmb_core::harness::PlacementMode;
use hmb_core::{DemuxMode, Method};

#[derive(Debug, Parser)]
#[command(name = "hmb", version, about = "Hashing multi-arm beam training simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a polar-domain single-beam codebook.
    Codebook(CodebookArgs),
    /// Build hashed multi-arm codebooks for one AP.
    Multibeam(MultibeamArgs),
    /// Run one seeded training trial and print its trace.
    Train(TrainArgs),
    /// Run a Monte Carlo sweep and write the result tables.
    Sweep(SweepArgs),
    /// Render figures from a sweep directory.
    Plot(PlotArgs),
    /// Evaluate the hash-round bound.
    Bound(BoundArgs),
}

#[derive(Debug, Args)]
struct CodebookArgs {
    #[arg(short = 'M', long, default_value_t = 4)]
    m: usize,
    #[arg(short = 'N', long, default_value_t = 32)]
    n: usize,
    /// Carrier frequency in Hz.
    #[arg(long, default_value_t = 28e9)]
    carrier_hz: f64,
    /// Adjacent-ring coherence threshold.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    /// Ring spacing axis: finer, z or x.
    #[arg(long, default_value = "finer")]
    axis: RingAxis,
    #[arg(long)]
    far_field_only: bool,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Experiment configuration with command-line overrides.
///
/// Precedence: profile or `--config` file, then `HMB_SEED`, then flags.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// JSON experiment configuration.
    #[arg(long, conflicts_with = "profile")]
    config: Option<PathBuf>,
    /// Named configuration: desk or full.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(short = 'M', long)]
    m: Option<usize>,
    #[arg(short = 'N', long)]
    n: Option<usize>,
    /// Number of APs.
    #[arg(short = 'K', long)]
    aps: Option<usize>,
    #[arg(short = 'B', long)]
    buckets: Option<usize>,
    #[arg(short = 'L', long)]
    rounds: Option<usize>,
    /// Hash independence order.
    #[arg(long)]
    independence: Option<usize>,
    /// plain or round_constrained.
    #[arg(long)]
    demux: Option<DemuxMode>,
    /// Comma-separated methods: hmb, hmb_hard, eimb, exhaustive, dft.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Hard-decision threshold fraction.
    #[arg(long)]
    alpha: Option<f64>,
    /// Optimize multi-arm phases.
    #[arg(long)]
    optimize: bool,
    #[arg(long)]
    far_field_only: bool,
    /// continuous or grid.
    #[arg(long)]
    placement: Option<PlacementMode>,
    /// Extra scattering paths per AP.
    #[arg(long)]
    nlos: Option<usize>,
}

#[derive(Debug, Args)]
struct MultibeamArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Directory for one codebook file per round; summary only when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Reference SNR in dB.
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    snr_db: f64,
    /// Trial index within the seeded stream.
    #[arg(long, default_value_t = 0)]
    trial: usize,
    /// Vote tallies shown per AP.
    #[arg(long, default_value_t = 5)]
    top: usize,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated SNR points in dB.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr_db: Option<Vec<f64>>,
    /// Comma-separated bucket counts to sweep.
    #[arg(long, value_delimiter = ',')]
    sweep_buckets: Option<Vec<usize>>,
    /// Comma-separated round counts to sweep.
    #[arg(long, value_delimiter = ',')]
    sweep_rounds: Option<Vec<usize>>,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
    /// Also render figures into the output directory.
    #[arg(long)]
    plot: bool,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Sweep directory holding results.csv.
    #[arg(short, long)]
    input: PathBuf,
    /// Figure directory; the input directory when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundArgs {
    /// Number of candidate directions.
    #[arg(long, default_value_t = 100.0)]
    candidates: f64,
    #[arg(long, default_value_t = 0.8)]
    signal_min: f64,
    #[arg(long, default_value_t = 1.2)]
    signal_max: f64,
    #[arg(long, default_value_t = 0.05)]
    noise_min: f64,
    #[arg(long, default_value_t = 0.15)]
    noise_max: f64,
    /// Decision threshold; midway between the two means when absent.
    #[arg(long)]
    threshold: Option<f64>,
    /// Expected signal power; the range midpoint when absent.
    #[arg(long)]
    signal_mean: Option<f64>,
    /// Expected noise power; the range midpoint when absent.
    #[arg(long)]
    noise_mean: Option<f64>,
    /// Monte Carlo trials of the uniform two-level model at the bound.
    #[arg(long)]
    simulate: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!("{}", line.trim());
            return ExitCode::from(2);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
