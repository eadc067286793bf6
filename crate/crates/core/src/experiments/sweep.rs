//! Success-rate and infidelity studies over random instances.

use std::cmp::Ordering;
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ExactOptions, Frame, StateVector, hilbert_distance};
use crate::error::{Error, Result};
use crate::optimize::{double_check, optimize_transfer, TransferConfig, TransferProblem, DEFAULT_EPSILON};

use super::instance::{instance_seed, mix_seed, random_instance, RandomInstance, RandomInstanceSpec};

/// Drive-strength bound for one instance:
/// `min(rwa_fraction · min ω, max(separation_fraction · separation, detuning_ratio · |Δ|))`,
/// where `separation` is the smaller of the lowest drive frequency and the
/// closest distance between two coupled transition frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmplitudePolicy {
    pub rwa_fraction: f64,
    pub separation_fraction: f64,
    pub detuning_ratio: f64,
}

impl Default for AmplitudePolicy {
    fn default() -> Self {
        Self {
            rwa_fraction: 0.05,
            separation_fraction: 0.005,
            detuning_ratio: 50.0,
        }
    }
}

impl AmplitudePolicy {
    pub fn cap(&self, instance: &RandomInstance, detuning: f64) -> f64 {
        let min_omega = instance
            .edges
            .iter()
            .map(|&(k, j)| instance.system.transition(k, j) - detuning)
            .fold(f64::INFINITY, f64::min);
        let separation = instance.crosstalk_gap().min(min_omega);
        let wanted = (self.separation_fraction * separation).max(self.detuning_ratio * detuning.abs());
        wanted.min(self.rwa_fraction * min_omega)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub dimensions: Vec<usize>,
    pub detunings: Vec<f64>,
    pub goals_per_cell: usize,
    pub epsilon: f64,
    pub seed: u64,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
    pub double_check: bool,
    /// Local-error tolerance of the exact propagation.
    pub exact_tol: f64,
    pub min_gap: f64,
    pub amplitude: AmplitudePolicy,
    /// Optimizer settings; the seed is replaced per cell.
    pub optimizer: TransferConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            dimensions: (2..=6).collect(),
            detunings: (1..=7).map(|e| 10f64.powi(-e)).collect(),
            goals_per_cell: 50,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
            threads: 0,
            double_check: true,
            exact_tol: 1e-10,
            min_gap: 0.1,
            amplitude: AmplitudePolicy::default(),
            optimizer: TransferConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimensions.is_empty() || self.dimensions.iter().any(|&n| n < 2) {
            return Err(Error::InvalidArgument("sweep dimensions must be nonempty and >= 2".into()));
        }
        if self.detunings.is_empty() || self.detunings.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidArgument("sweep detunings must be nonempty and positive".into()));
        }
        if self.goals_per_cell == 0 {
            return Err(Error::InvalidArgument("goals per cell must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be in (0, 1), got {}", self.epsilon)));
        }
        if !(self.exact_tol > 0.0) {
            return Err(Error::InvalidArgument("exact tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// One optimized goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub detuning: f64,
    pub index: usize,
    pub instance_seed: u64,
    /// `‖goal − initial‖`.
    pub distance: f64,
    pub amplitude_cap: f64,
    pub rwa_infidelity: f64,
    pub rwa_success: bool,
    pub exact_infidelity: Option<f64>,
    pub exact_success: Option<bool>,
    pub duration: f64,
    pub evaluations: usize,
    pub exact_steps: Option<usize>,
    pub norm_drift: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub detuning: f64,
    pub goals: usize,
    pub errors: usize,
    pub rwa_successes: usize,
    pub exact_successes: usize,
    pub lambda_rwa: f64,
    pub lambda_exact: f64,
    pub median_rwa_infidelity: f64,
    pub median_exact_infidelity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub config: SweepConfig,
    pub cells: Vec<CellSummary>,
    /// Rows where the exact check succeeded although the RWA optimization failed.
    pub exact_without_rwa: usize,
    pub error_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

fn ground(n: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(n);
    v[0] = Complex64::new(1.0, 0.0);
    v
}

/// Optimizes and double-checks a single goal; errors are recorded in the row.
pub fn run_cell(config: &SweepConfig, n: usize, detuning: f64, index: usize) -> SweepRow {
    let seed = instance_seed(config.seed, n, index);
    let mut row = SweepRow {
        n,
        detuning,
        index,
        instance_seed: seed,
        distance: f64::NAN,
        amplitude_cap: f64::NAN,
        rwa_infidelity: 1.0,
        rwa_success: false,
        exact_infidelity: None,
        exact_success: None,
        duration: 0.0,
        evaluations: 0,
        exact_steps: None,
        norm_drift: None,
        error: None,
    };
    if let Err(e) = fill_cell(config, detuning, &mut row) {
        row.error = Some(e.to_string());
    }
    row
}

fn fill_cell(config: &SweepConfig, detuning: f64, row: &mut SweepRow) -> Result<()> {
    let spec = RandomInstanceSpec {
        min_gap: config.min_gap,
        ..RandomInstanceSpec::new(row.n, row.instance_seed)
    };
    let instance = random_instance(&spec)?;
    let initial = ground(row.n);
    row.distance = hilbert_distance(
        &StateVector::new(instance.goal.clone(), Frame::Interaction, 0.0),
        &StateVector::new(initial.clone(), Frame::Interaction, 0.0),
    )?;
    let cap = config.amplitude.cap(&instance, detuning);
    row.amplitude_cap = cap;
    let problem = TransferProblem::new(
        instance.system.clone(),
        instance.drives(detuning)?,
        initial,
        instance.goal.clone(),
        config.epsilon,
    )?;
    let optimizer = TransferConfig {
        amplitude_cap: Some(cap),
        seed: mix_seed(row.instance_seed ^ detuning.to_bits()),
        ..config.optimizer.clone()
    };
    let mut solution = optimize_transfer(&problem, &optimizer)?;
    row.rwa_infidelity = solution.rwa_infidelity;
    row.rwa_success = solution.rwa_success;
    row.duration = solution.duration;
    row.evaluations = solution.evaluations;
    if config.double_check {
        let options = ExactOptions {
            tol: config.exact_tol,
            ..Default::default()
        };
        solution = double_check(&problem, &solution, &options)?;
        row.exact_infidelity = solution.exact_infidelity;
        row.exact_success = solution.exact_success;
        if let Some(check) = solution.exact_check {
            row.exact_steps = Some(check.accepted_steps);
            row.norm_drift = Some(check.norm_drift);
        }
    }
    Ok(())
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 0 {
        0.5 * (values[m - 1] + values[m])
    } else {
        values[m]
    })
}

fn row_order(a: &SweepRow, b: &SweepRow) -> Ordering {
    a.n.cmp(&b.n)
        .then(a.detuning.total_cmp(&b.detuning))
        .then(a.instance_seed.cmp(&b.instance_seed))
        .then(a.index.cmp(&b.index))
}

/// Aggregates rows into per-(N, Δ) success rates.
pub fn summarize(config: &SweepConfig, rows: &[SweepRow]) -> SweepSummary {
    let mut cells: Vec<CellSummary> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let (n, d) = (rows[start].n, rows[start].detuning);
        let end = start + rows[start..].iter().take_while(|r| r.n == n && r.detuning == d).count();
        let cell = &rows[start..end];
        let goals = cell.len();
        let rwa_successes = cell.iter().filter(|r| r.rwa_success).count();
        let exact_successes = cell.iter().filter(|r| r.exact_success == Some(true)).count();
        let mut rwa: Vec<f64> = cell.iter().filter(|r| r.error.is_none()).map(|r| r.rwa_infidelity).collect();
        let mut exact: Vec<f64> = cell.iter().filter_map(|r| r.exact_infidelity).collect();
        cells.push(CellSummary {
            n,
            detuning: d,
            goals,
            errors: cell.iter().filter(|r| r.error.is_some()).count(),
            rwa_successes,
            exact_successes,
            lambda_rwa: rwa_successes as f64 / goals as f64,
            lambda_exact: exact_successes as f64 / goals as f64,
            median_rwa_infidelity: median(&mut rwa).unwrap_or(f64::NAN),
            median_exact_infidelity: median(&mut exact),
        });
        start = end;
    }
    SweepSummary {
        config: config.clone(),
        cells,
        exact_without_rwa: rows.iter().filter(|r| !r.rwa_success && r.exact_success == Some(true)).count(),
        error_rows: rows.iter().filter(|r| r.error.is_some()).count(),
    }
}

/// Runs every (N, Δ, goal) cell on a bounded worker pool and returns rows
/// in canonical order, independent of scheduling.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutput> {
    config.validate()?;
    let mut items = Vec::new();
    for &n in &config.dimensions {
        for &d in &config.detunings {
            for i in 0..config.goals_per_cell {
                items.push((n, d, i));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let mut rows: Vec<SweepRow> = pool.install(|| {
        items
            .par_iter()
            .map(|&(n, d, i)| run_cell(config, n, d, i))
            .collect()
    });
    rows.sort_by(row_order);
    let summary = summarize(config, &rows);
    Ok(SweepOutput { rows, summary })
}

/// Writes `sweep.csv` and `summary.json` into `dir`.
pub fn write_sweep(output: &SweepOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
    for row in &output.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let json = serde_json::to_string_pretty(&output.summary)?;
    std::fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(())
}
