//! Configuration, measurement files and end-to-end runs.

pub mod config;
pub mod data;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

pub use config::{load_config, Angle, ConfigFile, Mode, RunConfig};
pub use data::{load_measurements, write_measurements, MeasurementFile};
pub use report::{emit_plot_data, Reconstruction, RunReport};

use crate::error::{Error, Result};
use crate::optics::{run_experiment, theoretical_observables, theoretical_states};
use crate::recon::{loop_bootstrap, score_reconstruction, MeasMatrix, PrepMatrix};
use crate::spam::{delta_statistics, detect, localize, ExpectationMatrix};

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Store elapsed time in the report.
    pub record_timing: bool,
}

/// Element-wise mean of the samples as a 6×6 matrix.
pub fn mean_matrix(samples: &[ExpectationMatrix]) -> Result<ExpectationMatrix> {
    let first = samples.first().ok_or(Error::InsufficientSamples(0))?;
    let mut acc = vec![0.0; first.values().len()];
    for (index, s) in samples.iter().enumerate() {
        if s.shape() != first.shape() {
            return Err(Error::Sample {
                index,
                source: Box::new(Error::Shape {
                    expected: first.shape().to_string(),
                    got: s.shape().to_string(),
                }),
            });
        }
        for (a, v) in acc.iter_mut().zip(s.values()) {
            *a += v;
        }
    }
    let n = samples.len() as f64;
    let mean = ExpectationMatrix::new(first.shape(), acc.into_iter().map(|v| v / n).collect())?;
    Ok(mean.to_full())
}

/// Loop reconstruction from the mean matrix, scored on the distinct
/// preparations and settings of the plan (4 for n+1, 6 for 2n).
pub fn reconstruct(config: &RunConfig, samples: &[ExpectationMatrix]) -> Result<Reconstruction> {
    let mean = mean_matrix(samples)?;
    let solution = loop_bootstrap(&mean, &MeasMatrix::from_observables(&config.known_povms))?;
    let k = config.plan.scheme.settings();
    let states = PrepMatrix {
        rows: solution.states.rows[..k].to_vec(),
        raw: solution.states.raw[..k].to_vec(),
        renormalized: solution.states.renormalized[..k].to_vec(),
    };
    let povms = MeasMatrix {
        cols: solution.observables.cols[..k].to_vec(),
        raw: solution.observables.raw[..k].to_vec(),
        renormalized: solution.observables.renormalized[..k].to_vec(),
    };
    let score = score_reconstruction(
        &states,
        &theoretical_states(&config.plan),
        &povms,
        &theoretical_observables(&config.plan),
    )?;
    Ok(Reconstruction {
        mean_matrix: mean,
        solution,
        score,
    })
}

fn acquire(config: &RunConfig, report: &mut RunReport) -> Result<()> {
    match &config.input_data {
        Some(path) => {
            let file = load_measurements(path)?;
            if file.scheme != config.plan.scheme {
                return Err(Error::config(
                    "scheme",
                    format!(
                        "{} declares scheme {} but the run uses {}",
                        path.display(),
                        file.scheme,
                        config.plan.scheme
                    ),
                ));
            }
            report.samples = file.blocks;
        }
        None => {
            report.samples = run_experiment(&config.plan)?;
            report.simulated = true;
        }
    }
    Ok(())
}

fn analyze(config: &RunConfig, report: &mut RunReport) -> Result<()> {
    acquire(config, report)?;
    if config.mode == config::Mode::Simulate {
        return Ok(());
    }
    let stats = delta_statistics(&report.samples)?;
    let detection = localize(detect(&stats, config.detection_threshold), config.plan.scheme);
    let detected = detection.detected;
    report.stats = Some(stats);
    report.detection = Some(detection);
    if matches!(config.mode, config::Mode::Reconstruct | config::Mode::Full) {
        if detected {
            report
                .notes
                .push("reconstruction skipped: correlated SPAM error detected".into());
        } else {
            report.reconstruction = Some(reconstruct(config, &report.samples)?);
        }
    }
    Ok(())
}

/// Runs the configured pipeline in memory. Module errors end up in
/// `report.error` rather than being returned.
pub fn execute(config: &RunConfig) -> RunReport {
    let mut report = RunReport::new(config.clone());
    if let Err(e) = analyze(config, &mut report) {
        report.error = Some(e.to_string());
    }
    report
}

/// Paths written by [`run`].
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub report: PathBuf,
    pub measurements: Option<PathBuf>,
    pub grids: Vec<PathBuf>,
}

/// Executes the pipeline and writes `report.json`, `measurements.csv` (for
/// simulated data) and the plot grids into the output directory.
pub fn run(config: &RunConfig, options: RunOptions) -> Result<(RunReport, Artifacts)> {
    let start = Instant::now();
    let mut report = execute(config);
    if options.record_timing {
        report.wall_clock_ms = Some(start.elapsed().as_millis() as u64);
    }
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut artifacts = Artifacts {
        report: dir.join("report.json"),
        ..Default::default()
    };
    if report.simulated {
        let path = dir.join("measurements.csv");
        write_measurements(&path, config.plan.scheme, &report.samples)?;
        artifacts.measurements = Some(path);
    }
    if report.stats.is_some() {
        artifacts.grids = emit_plot_data(&report, dir)?;
    }
    std::fs::write(&artifacts.report, report.to_json()).map_err(|e| Error::io(&artifacts.report, e))?;
    Ok((report, artifacts))
}
