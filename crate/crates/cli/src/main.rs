use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use loopspam::harness::{run, ConfigFile, Mode, RunOptions, RunReport};
use loopspam::spam::Localization;
use loopspam::Scheme;

/// Correlated SPAM-error detection and loop tomography for polarization qubits.
///
/// Exit status: 0 no correlation found, 2 correlation detected, 1 error.
#[derive(Parser)]
#[command(name = "loopspam", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate measurements and write them to measurements.csv
    Simulate(Common),
    /// Run the partial-determinant test and localize flagged errors
    Analyze(Common),
    /// Test for correlations, then reconstruct states and detectors
    Reconstruct(Common),
    /// Simulate or load data, analyze and reconstruct
    Full(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Measurement file to analyze instead of simulating
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Detection threshold in standard deviations
    #[arg(long)]
    threshold: Option<f64>,
    /// 2n or n+1
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Record wall-clock time in the report (reports stop being reproducible)
    #[arg(long)]
    record_timing: bool,
}

fn load(mode: Mode, args: &Common) -> Result<ConfigFile> {
    let mut cf = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    cf.mode = Some(mode);
    if args.data.is_some() {
        cf.input_data = args.data.clone();
    }
    if args.out.is_some() {
        cf.output_dir = args.out.clone();
    }
    if args.seed.is_some() {
        cf.seed = args.seed;
    }
    if args.threshold.is_some() {
        cf.threshold = args.threshold;
    }
    if args.scheme.is_some() {
        cf.scheme = args.scheme;
    }
    Ok(cf)
}

fn summarize(report: &RunReport) {
    if let Some(err) = &report.error {
        eprintln!("error: {err}");
        return;
    }
    println!("samples: {}", report.samples.len());
    let Some(d) = &report.detection else { return };
    if !d.detected {
        println!("no correlated SPAM error (threshold {}σ)", d.threshold);
    } else {
        println!("correlated SPAM error detected (threshold {}σ)", d.threshold);
        for f in &d.flagged_elements {
            println!("  Δ-1 ({},{}): {:.2}σ", f.row, f.col, f.significance);
        }
        match d.localization {
            Localization::Candidates => {
                let list: Vec<String> = d
                    .candidate_locations
                    .iter()
                    .map(|c| format!("(prep {}, setting {})", c.prep, c.setting))
                    .collect();
                println!("  candidates: {}", list.join(" "));
            }
            _ => println!("  {}", d.note),
        }
    }
    if let Some(r) = &report.reconstruction {
        println!(
            "reconstruction: min fidelity {:.4}, max POVM relative error {:.4}, loop residual {:.2e}",
            r.score.min_fidelity(),
            r.score.max_relative_error(),
            r.solution.consistency_residual
        );
    }
    for n in &report.notes {
        println!("note: {n}");
    }
}

fn main_inner() -> Result<i32> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            e.print()?;
            return Ok(0);
        }
        Err(e) => {
            // clap exits with 2 on usage errors, which here means "detected"
            e.print()?;
            return Ok(1);
        }
    };
    let (mode, args) = match &cli.command {
        Command::Simulate(a) => (Mode::Simulate, a),
        Command::Analyze(a) => (Mode::Analyze, a),
        Command::Reconstruct(a) => (Mode::Reconstruct, a),
        Command::Full(a) => (Mode::Full, a),
    };
    let config = load(mode, args)?.resolve()?;
    let (report, artifacts) = run(
        &config,
        RunOptions {
            record_timing: args.record_timing,
        },
    )
    .context("writing outputs")?;
    summarize(&report);
    println!("report: {}", artifacts.report.display());
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
