//! `txcs` - command-line workflows for tactile compressed sensing.
//!
//! Subcommands cover the whole pipeline: generate a synthetic recording,
//! measure it through a seeded block-Hadamard operator, reconstruct with
//! warm-started FISTA, run full PSNR sweeps from a config file, compute
//! per-step sparsity statistics, and emit the daisy-chain wiring report.
//!
//! Exit codes: 0 on success, 1 on validation/config/usage errors, 2 on
//! I/O errors. All randomness is seeded through explicit flags or config
//! fields; no subcommand mutates its input files.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use txcs_core::error::Error;
use txcs_core::eval::{self, ScenarioConfig, SweepConfig};
use txcs_core::grid::{
    read_measurements, read_recording, write_measurements, write_recording, MeasurementSet,
    Recording,
};
use txcs_core::measure::build_sbhe;
use txcs_core::solve::{reconstruct_recording, SolverConfig};
use txcs_core::transform::{nnz, WaveletBasis, WaveletKind, DEFAULT_NNZ_TOL};

#[derive(Parser)]
#[command(
    name = "txcs",
    version,
    about = "Compressed-sensing acquisition and reconstruction for tactile sensor grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic ground-truth recording from a scenario file.
    Generate(GenerateArgs),
    /// Measure every frame of a recording through a seeded operator.
    Measure(MeasureArgs),
    /// Reconstruct a recording from a measurement file.
    Reconstruct(ReconstructArgs),
    /// Run the PSNR sweep harness from an experiment config.
    Sweep(SweepArgs),
    /// Per-time-step wavelet sparsity of a recording.
    Sparsity(SparsityArgs),
    /// Emit the daisy-chain wiring report for an operator.
    WiringReport(WiringReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Scenario description (TOML, same fields as a sweep config scenario).
    #[arg(long)]
    spec: PathBuf,
    /// Output recording (TXCS binary).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MeasureArgs {
    /// Input recording (TXCS binary).
    #[arg(long)]
    rec: PathBuf,
    /// Measurement count M.
    #[arg(long)]
    m: usize,
    /// Hadamard block size B.
    #[arg(long)]
    block: usize,
    /// Operator seed.
    #[arg(long)]
    seed: u64,
    /// Output measurement file (TXCS binary, record type 1).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Input measurement file.
    #[arg(long)]
    meas: PathBuf,
    /// Optional cross-check of the file's measurement count.
    #[arg(long)]
    m: Option<usize>,
    /// Optional cross-check of the file's block size.
    #[arg(long)]
    block: Option<usize>,
    /// Optional cross-check of the file's operator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// FISTA iterations per time-step.
    #[arg(long, default_value_t = 30)]
    iters: usize,
    /// L1 regularization weight.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Output recording (TXCS binary).
    #[arg(long)]
    out: PathBuf,
    /// Optional objective-trace CSV (t,iteration,objective).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the summary and time-series CSVs.
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker pool size over configurations (1 keeps timings comparable).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct SparsityArgs {
    /// Input recording.
    #[arg(long)]
    rec: PathBuf,
    /// Wavelet basis for the sparsity count.
    #[arg(long, value_enum)]
    basis: BasisArg,
    /// Output CSV (t,nnz).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WiringReportArgs {
    /// Signal length N (taxel count).
    #[arg(long)]
    n: usize,
    /// Measurement count M.
    #[arg(long)]
    m: usize,
    /// Hadamard block size B.
    #[arg(long)]
    block: usize,
    /// Operator seed.
    #[arg(long)]
    seed: u64,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    D2,
    D4,
}

impl From<BasisArg> for WaveletKind {
    fn from(value: BasisArg) -> Self {
        match value {
            BasisArg::D2 => WaveletKind::D2,
            BasisArg::D4 => WaveletKind::D4,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Measure(args) => measure(args),
        Command::Reconstruct(args) => reconstruct(args),
        Command::Sweep(args) => sweep(args),
        Command::Sparsity(args) => sparsity(args),
        Command::WiringReport(args) => wiring_report(args),
    }
}

fn generate(args: GenerateArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&args.spec).map_err(|e| Error::io(&args.spec, e))?;
    let config: ScenarioConfig =
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let spec = config.to_spec("scenario")?;
    let rec = txcs_core::scenario::generate(&spec)?;
    write_recording(&rec, &args.out)?;
    println!(
        "wrote {} steps of a {}x{} recording to {}",
        rec.len(),
        rec.shape().rows(),
        rec.shape().cols(),
        args.out.display()
    );
    Ok(())
}

fn measure(args: MeasureArgs) -> Result<(), Error> {
    let rec = read_recording(&args.rec)?;
    let op = build_sbhe(rec.shape().n(), args.m, args.block, args.seed)?;
    let vectors = rec
        .frames()
        .iter()
        .map(|f| op.apply(f))
        .collect::<Result<Vec<_>, _>>()?;
    let set = MeasurementSet {
        shape: rec.shape(),
        dt: rec.dt(),
        f_min: rec.f_min(),
        f_max: rec.f_max(),
        m: args.m,
        block_size: args.block,
        seed: args.seed,
        vectors,
    };
    write_measurements(&set, &args.out)?;
    println!(
        "measured {} steps: N = {} -> M = {} (compression {:.2}:1)",
        rec.len(),
        rec.shape().n(),
        args.m,
        rec.shape().n() as f64 / args.m as f64
    );
    Ok(())
}

fn cross_check<T: PartialEq + std::fmt::Display>(
    flag: Option<T>,
    actual: T,
    what: &str,
) -> Result<(), Error> {
    if let Some(expected) = flag {
        if expected != actual {
            return Err(Error::Validation(format!(
                "--{what} {expected} does not match the measurement file ({actual})"
            )));
        }
    }
    Ok(())
}

fn reconstruct(args: ReconstructArgs) -> Result<(), Error> {
    let set = read_measurements(&args.meas)?;
    cross_check(args.m, set.m, "m")?;
    cross_check(args.block, set.block_size, "block")?;
    cross_check(args.seed, set.seed, "seed")?;
    let op = build_sbhe(set.shape.n(), set.m, set.block_size, set.seed)?;
    let basis = WaveletBasis::with_max_levels(WaveletKind::D2, set.shape)?;
    let cfg = SolverConfig {
        lambda: args.lambda,
        max_iters: args.iters,
        record_objective: args.trace.is_some(),
        ..Default::default()
    };
    let reports = reconstruct_recording(&op, &basis, &set.vectors, &cfg)?;

    let frames = reports.iter().map(|r| r.frame.clone()).collect();
    let rec = Recording::new(set.shape, set.dt, frames, set.f_min, set.f_max)?;
    write_recording(&rec, &args.out)?;

    if let Some(trace_path) = &args.trace {
        let mut text = String::from("t,iteration,objective\n");
        for (t, report) in reports.iter().enumerate() {
            for (k, objective) in report.objective_trace.iter().enumerate() {
                text.push_str(&format!("{t},{},{objective}\n", k + 1));
            }
        }
        fs::write(trace_path, text).map_err(|e| Error::io(trace_path, e))?;
    }

    // Re-measure the reconstruction to report the residual per step.
    let mut residuals = Vec::with_capacity(reports.len());
    for (report, y) in reports.iter().zip(&set.vectors) {
        let yhat = op.apply(&report.frame)?;
        let r2: f64 = yhat
            .values
            .iter()
            .zip(&y.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        residuals.push(r2.sqrt());
    }
    let mean_residual = residuals.iter().sum::<f64>() / residuals.len().max(1) as f64;
    let max_residual = residuals.iter().cloned().fold(0.0f64, f64::max);
    let mean_secs =
        reports.iter().map(|r| r.wall_time).sum::<f64>() / reports.len().max(1) as f64;
    println!(
        "reconstructed {} steps ({} iterations each, lambda = {}); \
         residual ||y - Phi x||_2 mean = {mean_residual:.6}, max = {max_residual:.6}; \
         mean solve time {:.3} ms/step",
        reports.len(),
        args.iters,
        args.lambda,
        mean_secs * 1e3
    );
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Error> {
    if args.jobs == 0 {
        return Err(Error::InvalidParameter("--jobs must be at least 1".into()));
    }
    let config = SweepConfig::from_path(&args.config)?;
    let result = eval::run_sweep(&config, args.jobs)?;
    eval::write_sweep_outputs(&result, &args.out_dir)?;
    println!(
        "{:<20} {:>5} {:>6} {:>5} {:>12} {:>16} {:>12} {:>16} {:>12}",
        "scenario", "n", "m", "iter", "recon mean", "recon range", "noisy mean", "noisy range", "ms/step"
    );
    for row in &result.rows {
        println!(
            "{:<20} {:>5} {:>6} {:>5} {:>12.1} {:>7.1} -{:>7.1} {:>12.1} {:>7.1} -{:>7.1} {:>12.3}",
            row.scenario,
            row.n,
            row.m,
            row.iterations,
            row.reconstructed.mean,
            row.reconstructed.min,
            row.reconstructed.max,
            row.noisy.mean,
            row.noisy.min,
            row.noisy.max,
            row.mean_solve_secs * 1e3
        );
    }
    println!("wrote {} rows to {}", result.rows.len(), args.out_dir.display());
    Ok(())
}

fn sparsity(args: SparsityArgs) -> Result<(), Error> {
    let rec = read_recording(&args.rec)?;
    let basis = WaveletBasis::with_max_levels(args.basis.into(), rec.shape())?;
    let mut counts = Vec::with_capacity(rec.len());
    let mut text = String::from("t,nnz\n");
    for (t, frame) in rec.frames().iter().enumerate() {
        let coeffs = basis.forward(frame)?;
        let count = nnz(&coeffs, DEFAULT_NNZ_TOL);
        counts.push(count);
        text.push_str(&format!("{t},{count}\n"));
    }
    fs::write(&args.out, text).map_err(|e| Error::io(&args.out, e))?;
    let mean = counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64;
    let max = counts.iter().max().copied().unwrap_or(0);
    println!(
        "sparsity over {} steps: mean nnz = {mean:.1}, max nnz = {max} (N = {})",
        rec.len(),
        rec.shape().n()
    );
    Ok(())
}

fn wiring_report(args: WiringReportArgs) -> Result<(), Error> {
    let op = build_sbhe(args.n, args.m, args.block, args.seed)?;
    let report = op.wiring_report();
    let mut buf = Vec::new();
    report
        .write_csv(&mut buf)
        .map_err(|e| Error::io(&args.out, e))?;
    fs::write(&args.out, &buf).map_err(|e| Error::io(&args.out, e))?;
    println!(
        "{} chains of {} taxels each; {} of {} rows selected",
        report.chains.len(),
        report.block_size,
        args.m,
        args.n
    );
    Ok(())
}
