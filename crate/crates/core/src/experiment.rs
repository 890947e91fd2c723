//! Seeded phase-transition sweeps and their CSV output.
//!
//! Every trial draws an ODEC truth, a Gaussian measurement map and noise
//! from seeds derived from `(base_seed, cell_index, trial_index)`, so the
//! records do not depend on how the trials are scheduled.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::odec::sample_random_odec;
use crate::recovery::{admm_recover, observe, GaussianMeasurement, NoiseMode, SolverConfig};
use crate::seed;
use crate::tensor::Shape;

pub const CSV_HEADER: [&str; 10] = [
    "n1",
    "n2",
    "n3",
    "r",
    "m",
    "seed",
    "rel_error",
    "iterations",
    "success",
    "wall_time",
];

pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 1e-3;

fn default_threshold() -> f64 {
    DEFAULT_SUCCESS_THRESHOLD
}

fn default_noise() -> NoiseMode {
    NoiseMode::ExactEta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub shapes: Vec<[usize; 3]>,
    pub ranks: Vec<usize>,
    pub measurements: Vec<usize>,
    #[serde(default)]
    pub eta: f64,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
    #[serde(default = "default_noise")]
    pub noise: NoiseMode,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() || self.ranks.is_empty() || self.measurements.is_empty() {
            return Err(Error::InvalidArgument(
                "shape, rank and measurement grids must be nonempty".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eta must be nonnegative, got {}",
                self.eta
            )));
        }
        if self.measurements.contains(&0) {
            return Err(Error::InvalidArgument("measurement counts must be positive".into()));
        }
        for dims in &self.shapes {
            Shape::new(dims.to_vec())?;
            let min = *dims.iter().min().expect("three modes");
            if let Some(&r) = self.ranks.iter().find(|&&r| r == 0 || r > min) {
                return Err(Error::Rank {
                    rank: r,
                    reason: format!("exceeds min dimension of {dims:?}"),
                });
            }
        }
        self.solver.validate()
    }

    /// Grid cells in (shape, rank, m) order.
    pub fn cells(&self) -> Vec<([usize; 3], usize, usize)> {
        let mut cells = Vec::new();
        for &dims in &self.shapes {
            for &r in &self.ranks {
                for &m in &self.measurements {
                    cells.push((dims, r, m));
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub r: usize,
    pub m: usize,
    pub seed: u64,
    pub rel_error: f64,
    pub abs_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub success: bool,
    pub wall_time: f64,
}

/// One CSV row: the columns of [`CSV_HEADER`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub r: usize,
    pub m: usize,
    pub seed: u64,
    pub rel_error: f64,
    pub iterations: usize,
    pub success: bool,
    pub wall_time: f64,
}

impl From<&TrialRecord> for CsvRecord {
    fn from(t: &TrialRecord) -> Self {
        CsvRecord {
            n1: t.n1,
            n2: t.n2,
            n3: t.n3,
            r: t.r,
            m: t.m,
            seed: t.seed,
            rel_error: t.rel_error,
            iterations: t.iterations,
            success: t.success,
            wall_time: t.wall_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub dims: [usize; 3],
    pub r: usize,
    pub m: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub median_iterations: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutcome {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<CellSummary>,
}

fn run_trial(spec: &ExperimentSpec, dims: [usize; 3], r: usize, m: usize, trial_seed: u64) -> Result<TrialRecord> {
    let start = Instant::now();
    let shape = Shape::new(dims.to_vec())?;
    let truth = sample_random_odec(&shape, r, &vec![1.0; r], seed::derive(trial_seed, &[0]))?.to_dense();
    let phi = GaussianMeasurement::new(shape, m, seed::derive(trial_seed, &[1]))?;
    let obs = observe(&phi, &truth, spec.eta, spec.noise, seed::derive(trial_seed, &[2]))?;
    let result = admm_recover(&phi, &obs, &spec.solver)?;
    let abs_error = result.estimate().sub(&truth)?.frobenius_norm();
    let rel_error = abs_error / truth.frobenius_norm();
    Ok(TrialRecord {
        n1: dims[0],
        n2: dims[1],
        n3: dims[2],
        r,
        m,
        seed: trial_seed,
        rel_error,
        abs_error,
        iterations: result.iterations,
        converged: result.converged,
        success: rel_error <= spec.success_threshold,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn median(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}

/// Runs every trial of every cell; records come back in (cell, trial) order.
pub fn phase_transition(spec: &ExperimentSpec) -> Result<PhaseOutcome> {
    spec.validate()?;
    let cells = spec.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.trials).map(move |t| (c, t)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(c, t)| {
            let (dims, r, m) = cells[c];
            run_trial(spec, dims, r, m, seed::derive(spec.base_seed, &[c as u64, t as u64]))
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = cells
        .iter()
        .enumerate()
        .map(|(c, &(dims, r, m))| {
            let rows = &records[c * spec.trials..(c + 1) * spec.trials];
            let successes = rows.iter().filter(|t| t.success).count();
            let mut iterations: Vec<usize> = rows.iter().map(|t| t.iterations).collect();
            CellSummary {
                dims,
                r,
                m,
                trials: spec.trials,
                successes,
                success_rate: successes as f64 / spec.trials as f64,
                median_iterations: median(&mut iterations),
            }
        })
        .collect();
    Ok(PhaseOutcome { records, summary })
}

/// Sidecar written next to a phase CSV so the file is self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMetadata {
    pub columns: Vec<String>,
    pub success_threshold: f64,
    pub eta: f64,
    pub noise: NoiseMode,
    pub base_seed: u64,
    pub trials: usize,
    pub solver: SolverConfig,
    pub summary: Vec<CellSummary>,
}

impl PhaseMetadata {
    pub fn new(spec: &ExperimentSpec, outcome: &PhaseOutcome) -> Self {
        PhaseMetadata {
            columns: CSV_HEADER.iter().map(|c| c.to_string()).collect(),
            success_threshold: spec.success_threshold,
            eta: spec.eta,
            noise: spec.noise,
            base_seed: spec.base_seed,
            trials: spec.trials,
            solver: spec.solver,
            summary: outcome.summary.clone(),
        }
    }
}

/// `rows.csv` -> `rows.csv.meta.json`.
pub fn metadata_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the header and one row per record. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_error(path))?;
    writer.write_record(CSV_HEADER).map_err(csv_error(path))?;
    for record in records {
        writer.serialize(CsvRecord::from(record)).map_err(csv_error(path))?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_error(path))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != CSV_HEADER {
        return Err(Error::Format(format!(
            "unexpected CSV header {header:?} in {}",
            path.display()
        )));
    }
    reader.deserialize().map(|row| row.map_err(csv_error(path))).collect()
}
