//! Reconstruction quality metrics and the experiment sweep harness.
//!
//! PSNR uses the sensor range width as its fixed peak so values stay
//! comparable across time-steps, including near-zero frames. Steps that
//! reconstruct exactly (pre-contact frames) produce infinite PSNR; those
//! are counted separately and excluded from the mean/min/max statistics.
//!
//! A sweep runs the full pipeline per configuration - generate, smooth,
//! add noise, measure every frame, reconstruct with warm starts - over
//! the cross product of scenarios, measurement counts, and iteration
//! budgets described by a versioned TOML config. All output CSVs are
//! byte-deterministic given the config; solve wall-times are returned
//! in memory (and printed by the CLI) but never written to the output
//! files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::{Frame, GridShape, Recording, DEFAULT_FORCE_MAX, DEFAULT_FORCE_MIN};
use crate::measure::build_sbhe;
use crate::scenario::{self, NoiseModel, ScenarioKind, ScenarioSpec, DEFAULT_NOISE_SIGMA_MID};
use crate::solve::{reconstruct_recording, SolverConfig};
use crate::transform::{WaveletBasis, WaveletKind};

/// Peak signal-to-noise ratio in dB: `10 log10(peak^2 / MSE)`. Returns
/// infinity when the frames agree exactly.
pub fn psnr(reference: &Frame, candidate: &Frame, peak: f64) -> Result<f64> {
    if reference.shape() != candidate.shape() {
        return Err(Error::DimensionMismatch(format!(
            "cannot compare a {}x{} frame with a {}x{} frame",
            reference.shape().rows(),
            reference.shape().cols(),
            candidate.shape().rows(),
            candidate.shape().cols()
        )));
    }
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "PSNR peak must be positive, got {peak}"
        )));
    }
    let n = reference.shape().n() as f64;
    let mse: f64 = reference
        .values()
        .iter()
        .zip(candidate.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Summary over a PSNR time series. Infinite entries (exact steps) are
/// excluded and counted; a series with no finite entry reports infinite
/// mean/min/max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub infinite_steps: usize,
}

impl SeriesStats {
    pub fn from_values(values: &[f64]) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let infinite_steps = values.len() - finite.len();
        if finite.is_empty() {
            return SeriesStats {
                mean: f64::INFINITY,
                min: f64::INFINITY,
                max: f64::INFINITY,
                infinite_steps,
            };
        }
        let mean = finite.iter().sum::<f64>() / finite.len() as f64;
        let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        SeriesStats {
            mean,
            min,
            max,
            infinite_steps,
        }
    }

    /// max - min over the finite entries.
    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

/// Per-time-step PSNR of the reconstruction and of the noisy signal,
/// both against the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PsnrSeries {
    pub reconstructed_db: Vec<f64>,
    pub noisy_db: Vec<f64>,
}

impl PsnrSeries {
    /// Compares reconstruction and noisy recording against the ground
    /// truth, step by step, with `peak` fixed to the truth's range width.
    pub fn compute(
        truth: &Recording,
        reconstructed: &[Frame],
        noisy: &Recording,
    ) -> Result<PsnrSeries> {
        if reconstructed.len() != truth.len() || noisy.len() != truth.len() {
            return Err(Error::DimensionMismatch(format!(
                "step counts disagree: truth {}, reconstruction {}, noisy {}",
                truth.len(),
                reconstructed.len(),
                noisy.len()
            )));
        }
        let peak = truth.range_width();
        let mut reconstructed_db = Vec::with_capacity(truth.len());
        let mut noisy_db = Vec::with_capacity(truth.len());
        for ((truth_frame, recon_frame), noisy_frame) in
            truth.frames().iter().zip(reconstructed).zip(noisy.frames())
        {
            reconstructed_db.push(psnr(truth_frame, recon_frame, peak)?);
            noisy_db.push(psnr(truth_frame, noisy_frame, peak)?);
        }
        Ok(PsnrSeries {
            reconstructed_db,
            noisy_db,
        })
    }

    pub fn reconstructed_stats(&self) -> SeriesStats {
        SeriesStats::from_values(&self.reconstructed_db)
    }

    pub fn noisy_stats(&self) -> SeriesStats {
        SeriesStats::from_values(&self.noisy_db)
    }

    pub fn len(&self) -> usize {
        self.reconstructed_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reconstructed_db.is_empty()
    }
}

/// Writes a PSNR time series as CSV rows `t,psnr_reconstructed_db,
/// psnr_noisy_db`; infinities render as the literal token `inf`.
pub fn emit_timeseries(series: &PsnrSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_timeseries(series, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

pub fn write_timeseries<W: Write>(series: &PsnrSeries, mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,psnr_reconstructed_db,psnr_noisy_db")?;
    for t in 0..series.len() {
        writeln!(
            w,
            "{t},{},{}",
            series.reconstructed_db[t], series.noisy_db[t]
        )?;
    }
    Ok(())
}

// --- experiment config -------------------------------------------------

/// One scenario entry of the experiment config.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    /// `square-press`, `shape-drag`, or `blob-path`.
    pub kind: String,
    pub rows: usize,
    pub cols: usize,
    pub steps: usize,
    pub dt: f64,
    pub peak_force: f64,
    pub seed: u64,
    /// Square/L-shape edge length in taxels.
    pub footprint: Option<usize>,
    /// Drag speed in taxels per step.
    pub velocity: Option<f64>,
    /// Random-walk step length in taxels.
    pub step_len: Option<f64>,
}

impl ScenarioConfig {
    pub fn to_spec(&self, field: &str) -> Result<ScenarioSpec> {
        let kind = match self.kind.as_str() {
            "square-press" => ScenarioKind::SquarePress {
                footprint: self.footprint.ok_or_else(|| {
                    Error::Config(format!("{field}.footprint: required for square-press"))
                })?,
            },
            "shape-drag" => ScenarioKind::ShapeDrag {
                footprint: self.footprint.ok_or_else(|| {
                    Error::Config(format!("{field}.footprint: required for shape-drag"))
                })?,
                velocity: self.velocity.ok_or_else(|| {
                    Error::Config(format!("{field}.velocity: required for shape-drag"))
                })?,
            },
            "blob-path" => ScenarioKind::BlobPath {
                step_len: self.step_len.ok_or_else(|| {
                    Error::Config(format!("{field}.step_len: required for blob-path"))
                })?,
            },
            other => {
                return Err(Error::Config(format!(
                    "{field}.kind: unknown scenario kind {other:?}"
                )))
            }
        };
        let shape = GridShape::new(self.rows, self.cols)
            .map_err(|e| Error::Config(format!("{field}.rows/cols: {e}")))?;
        Ok(ScenarioSpec {
            kind,
            shape,
            steps: self.steps,
            dt: self.dt,
            peak_force: self.peak_force,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "default_sigma_mid")]
    pub sigma_mid: f64,
    #[serde(default = "default_f_min")]
    pub f_min: f64,
    #[serde(default = "default_f_max")]
    pub f_max: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_sigma_mid() -> f64 {
    DEFAULT_NOISE_SIGMA_MID
}

fn default_f_min() -> f64 {
    DEFAULT_FORCE_MIN
}

fn default_f_max() -> f64 {
    DEFAULT_FORCE_MAX
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            sigma_mid: default_sigma_mid(),
            f_min: default_f_min(),
            f_max: default_f_max(),
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn to_model(&self) -> NoiseModel {
        NoiseModel {
            sigma_mid: self.sigma_mid,
            f_min: self.f_min,
            f_max: self.f_max,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingConfig {
    #[serde(default = "default_smoothing_width")]
    pub width: usize,
}

fn default_smoothing_width() -> usize {
    10
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            width: default_smoothing_width(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(default = "default_block_size")]
    pub block_size: usize,
    #[serde(default)]
    pub seed: u64,
    pub m_values: Vec<usize>,
}

fn default_block_size() -> usize {
    32
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSweepConfig {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_iteration_counts")]
    pub iteration_counts: Vec<usize>,
    #[serde(default = "default_power_iters")]
    pub power_iters: usize,
    #[serde(default = "default_power_tol")]
    pub power_tol: f64,
}

fn default_lambda() -> f64 {
    0.1
}

fn default_iteration_counts() -> Vec<usize> {
    vec![30]
}

fn default_power_iters() -> usize {
    100
}

fn default_power_tol() -> f64 {
    1e-3
}

impl Default for SolverSweepConfig {
    fn default() -> Self {
        SolverSweepConfig {
            lambda: default_lambda(),
            iteration_counts: default_iteration_counts(),
            power_iters: default_power_iters(),
            power_tol: default_power_tol(),
        }
    }
}

/// Top-level experiment config (TOML, schema version 1).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub version: u32,
    pub scenarios: Vec<ScenarioConfig>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub smoothing: SmoothingConfig,
    pub operator: OperatorConfig,
    #[serde(default)]
    pub solver: SolverSweepConfig,
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: SweepConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != 1 {
            return Err(Error::Config(format!(
                "version: unsupported config version {} (expected 1)",
                self.version
            )));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config("scenarios: at least one required".into()));
        }
        let mut names = std::collections::HashSet::new();
        for (i, sc) in self.scenarios.iter().enumerate() {
            let field = format!("scenarios[{i}]");
            if sc.name.is_empty() {
                return Err(Error::Config(format!("{field}.name: must not be empty")));
            }
            // Names become output file stems.
            if !sc
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(Error::Config(format!(
                    "{field}.name: {:?} may only use ASCII letters, digits, '_' and '-'",
                    sc.name
                )));
            }
            if !names.insert(sc.name.clone()) {
                return Err(Error::Config(format!(
                    "{field}.name: duplicate name {:?}",
                    sc.name
                )));
            }
            let spec = sc.to_spec(&field)?;
            let n = spec.shape.n();
            if n % self.operator.block_size != 0 {
                return Err(Error::Config(format!(
                    "operator.block_size: {} does not divide N = {n} of {field}",
                    self.operator.block_size
                )));
            }
            for (j, &m) in self.operator.m_values.iter().enumerate() {
                if m == 0 || m > n {
                    return Err(Error::Config(format!(
                        "operator.m_values[{j}]: {m} outside 1..={n} for {field}"
                    )));
                }
            }
        }
        if self.operator.m_values.is_empty() {
            return Err(Error::Config(
                "operator.m_values: at least one required".into(),
            ));
        }
        if self.solver.iteration_counts.is_empty() {
            return Err(Error::Config(
                "solver.iteration_counts: at least one required".into(),
            ));
        }
        Ok(())
    }
}

// --- sweep execution ----------------------------------------------------

/// One sweep row, keyed by (scenario, N, M, iterations).
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub scenario: String,
    pub rows: usize,
    pub cols: usize,
    pub n: usize,
    pub m: usize,
    pub iterations: usize,
    pub reconstructed: SeriesStats,
    pub noisy: SeriesStats,
    /// Mean seconds spent in the solver per time-step. Reported in
    /// memory only; excluded from the CSVs to keep them deterministic.
    pub mean_solve_secs: f64,
    pub series: PsnrSeries,
}

impl SweepRow {
    /// Deterministic file stem for this row's time-series CSV.
    pub fn timeseries_stem(&self) -> String {
        format!("timeseries_{}_m{}_i{}", self.scenario, self.m, self.iterations)
    }
}

/// All rows of one sweep, in configuration key order.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Summary CSV, one deterministic row per configuration.
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "scenario,rows,cols,n,m,iterations,\
             recon_mean_db,recon_min_db,recon_max_db,recon_inf_steps,\
             noisy_mean_db,noisy_min_db,noisy_max_db,noisy_inf_steps"
        )?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                row.scenario,
                row.rows,
                row.cols,
                row.n,
                row.m,
                row.iterations,
                row.reconstructed.mean,
                row.reconstructed.min,
                row.reconstructed.max,
                row.reconstructed.infinite_steps,
                row.noisy.mean,
                row.noisy.min,
                row.noisy.max,
                row.noisy.infinite_steps
            )?;
        }
        Ok(())
    }
}

/// Runs every configuration in the sweep. `jobs` bounds the worker pool;
/// rows come back in configuration key order regardless of completion
/// order.
pub fn run_sweep(config: &SweepConfig, jobs: usize) -> Result<SweepResult> {
    config.validate()?;
    let mut tasks = Vec::new();
    for sc in &config.scenarios {
        for &m in &config.operator.m_values {
            for &iters in &config.solver.iteration_counts {
                tasks.push((sc.clone(), m, iters));
            }
        }
    }
    let rows: Result<Vec<SweepRow>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            tasks
                .par_iter()
                .map(|(sc, m, iters)| run_configuration(config, sc, *m, *iters))
                .collect()
        })
    } else {
        tasks
            .iter()
            .map(|(sc, m, iters)| run_configuration(config, sc, *m, *iters))
            .collect()
    };
    Ok(SweepResult { rows: rows? })
}

fn run_configuration(
    config: &SweepConfig,
    sc: &ScenarioConfig,
    m: usize,
    iterations: usize,
) -> Result<SweepRow> {
    let spec = sc.to_spec(&format!("scenario {:?}", sc.name))?;
    let truth = scenario::generate(&spec)?;
    let truth = scenario::smooth(&truth, config.smoothing.width)?;
    let noisy = scenario::add_noise(&truth, &config.noise.to_model())?;

    let op = build_sbhe(spec.shape.n(), m, config.operator.block_size, config.operator.seed)?;
    let basis = WaveletBasis::with_max_levels(WaveletKind::D2, spec.shape)?;
    let measurements = noisy
        .frames()
        .iter()
        .map(|f| op.apply(f))
        .collect::<Result<Vec<_>>>()?;

    let solver_cfg = SolverConfig {
        lambda: config.solver.lambda,
        max_iters: iterations,
        lipschitz: None,
        power_iters: config.solver.power_iters,
        power_tol: config.solver.power_tol,
        record_objective: false,
    };
    let reports = reconstruct_recording(&op, &basis, &measurements, &solver_cfg)?;
    let frames: Vec<Frame> = reports.iter().map(|r| r.frame.clone()).collect();
    let mean_solve_secs =
        reports.iter().map(|r| r.wall_time).sum::<f64>() / reports.len().max(1) as f64;

    let series = PsnrSeries::compute(&truth, &frames, &noisy)?;
    Ok(SweepRow {
        scenario: sc.name.clone(),
        rows: spec.shape.rows(),
        cols: spec.shape.cols(),
        n: spec.shape.n(),
        m,
        iterations,
        reconstructed: series.reconstructed_stats(),
        noisy: series.noisy_stats(),
        mean_solve_secs,
        series,
    })
}

/// Writes the summary CSV plus one time-series CSV per row into
/// `out_dir`, creating it if needed. File contents are byte-deterministic
/// given the config.
pub fn write_sweep_outputs(result: &SweepResult, out_dir: impl AsRef<Path>) -> Result<()> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let summary_path = out_dir.join("sweep_results.csv");
    let mut buf = Vec::new();
    result
        .write_summary_csv(&mut buf)
        .map_err(|e| Error::io(&summary_path, e))?;
    fs::write(&summary_path, &buf).map_err(|e| Error::io(&summary_path, e))?;
    for row in &result.rows {
        let path = out_dir.join(format!("{}.csv", row.timeseries_stem()));
        emit_timeseries(&row.series, &path)?;
    }
    Ok(())
}
