//! Run reports and plot-data grids.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::linalg::Mat3;
use crate::recon::{LoopSolution, ReconstructionScore};
use crate::spam::{DeltaStats, DetectionReport, ExpectationMatrix};

pub const REPORT_SCHEMA: &str = "loopspam-report/1";
pub const GRID_SCHEMA: &str = "loopspam-grid/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    /// Element-wise mean of the samples, embedded to 6×6 when needed.
    pub mean_matrix: ExpectationMatrix,
    pub solution: LoopSolution,
    /// Scores of the distinct preparations and settings against the ideal bench.
    pub score: ReconstructionScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub seed: u64,
    /// `true` when the samples came from the simulator rather than a data file.
    pub simulated: bool,
    pub samples: Vec<ExpectationMatrix>,
    pub stats: Option<DeltaStats>,
    pub detection: Option<DetectionReport>,
    pub reconstruction: Option<Reconstruction>,
    pub notes: Vec<String>,
    pub error: Option<String>,
    /// Only recorded on request, since it breaks byte-identical reports.
    pub wall_clock_ms: Option<u64>,
}

impl RunReport {
    pub fn new(config: RunConfig) -> Self {
        RunReport {
            schema: REPORT_SCHEMA.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed: config.plan.noise.seed,
            config,
            simulated: false,
            samples: Vec::new(),
            stats: None,
            detection: None,
            reconstruction: None,
            notes: Vec::new(),
            error: None,
            wall_clock_ms: None,
        }
    }

    /// 1 on error, 2 when a correlated error was detected, otherwise 0.
    pub fn exit_code(&self) -> i32 {
        if self.error.is_some() {
            1
        } else if self.detection.as_ref().is_some_and(|d| d.detected) {
            2
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<report>"),
            message: e.to_string(),
        })
    }
}

fn grid_csv(report: &RunReport, stats: &DeltaStats, quantity: &str, grid: &Mat3) -> String {
    let mut out = format!(
        "# {GRID_SCHEMA} quantity={quantity} scheme={} repetitions={} threshold={} seed={}\n",
        report.config.plan.scheme, stats.repetitions, report.config.detection_threshold, report.seed
    );
    for r in 0..3 {
        let cells: Vec<String> = (0..3)
            .map(|c| {
                let v = grid[(r, c)];
                if v.is_infinite() {
                    if v > 0.0 { "inf".into() } else { "-inf".into() }
                } else {
                    v.to_string()
                }
            })
            .collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Writes `delta_mean.csv`, `delta_std.csv` and `delta_significance.csv` into `dir`.
pub fn emit_plot_data(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let stats = report.stats.as_ref().ok_or(Error::MissingStats)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (name, grid) in [
        ("mean", &stats.mean),
        ("std", &stats.std),
        ("significance", &stats.significance),
    ] {
        let path = dir.join(format!("delta_{name}.csv"));
        std::fs::write(&path, grid_csv(report, stats, name, grid)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
