//! Experiment orchestration: configuration, stability runs, gate reports,
//! characteristic-function checks and CSV output.

mod config;

use std::fs;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    Experiment, ExperimentConfig, GridSpec, MatrixSpec, ModelSpec, ObservableSpec, OutputSpec,
    Scalar, StateSpec, Tolerances,
};

use crate::abscont::{domination_constant, is_absolutely_continuous, kernel};
use crate::charfn::{char_fn, mc_char_fn, McEstimate};
use crate::error::{Error, Result};
use crate::matops::C64;
use crate::observability::{observable_space, project_observable, BasisElement, ObservableSpace};
use crate::trajectories::{simulate_pair_with, FilterKernel, FilterPairPath, SeedSpec};

/// `|z|` above which a characteristic-function check fails.
pub const ZSCORE_LIMIT: f64 = 5.0;
/// Paths simulated per batch before accumulating in path order.
const BATCH: usize = 64;

/// Gate verdicts and counters attached to every stability report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub observable: bool,
    pub observable_dim: usize,
    pub dim_p: usize,
    pub observability_borderline: bool,
    pub absolutely_continuous: bool,
    pub n_paths: usize,
    pub completed_paths: usize,
    /// Paths stopped because the misspecified filter was asked to jump
    /// from a dark state; excluded from the averages.
    pub aborted_paths: usize,
    pub clip_events_true: usize,
    pub clip_events_filter: usize,
    pub max_jump_probability: f64,
    pub master_seed: u64,
    pub dt: f64,
    pub n_steps: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    pub observable_names: Vec<String>,
    /// `[observable][time]`: Monte Carlo mean of `|Tr[X (rho_true - rho_filter)]|`.
    pub mean_abs_diff: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub trace_distance: Vec<f64>,
    pub stderr_trace_distance: Vec<f64>,
    pub metadata: RunMetadata,
}

impl StabilityReport {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        let i = self.observable_names.iter().position(|n| n == name)?;
        Some(&self.mean_abs_diff[i])
    }
}

/// Running sums over paths, per metric and stored time.
struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    n: usize,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            sum_sq: vec![0.0; len],
            n: 0,
        }
    }

    fn add(&mut self, values: &[f64]) {
        for ((s, q), v) in self.sum.iter_mut().zip(&mut self.sum_sq).zip(values) {
            *s += v;
            *q += v * v;
        }
        self.n += 1;
    }

    fn mean_and_stderr(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n as f64;
        if self.n == 0 {
            return (
                vec![f64::NAN; self.sum.len()],
                vec![f64::NAN; self.sum.len()],
            );
        }
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let stderr = if self.n < 2 {
            vec![0.0; self.sum.len()]
        } else {
            self.sum_sq
                .iter()
                .zip(&mean)
                .map(|(q, m)| ((q - n * m * m).max(0.0) / (n - 1.0) / n).sqrt())
                .collect()
        };
        (mean, stderr)
    }
}

type PathSummary = (Vec<f64>, crate::trajectories::PathDiagnostics);

/// Per-path metrics laid out `[metric][time]` flattened; the last metric is
/// the trace distance.
fn path_metrics(
    path: &FilterPairPath,
    observables: &[(String, crate::ComplexMatrix)],
) -> Result<Vec<f64>> {
    let n_t = path.times.len();
    let mut out = vec![0.0; n_t * (observables.len() + 1)];
    for (k, (a, b)) in path.rho_true.iter().zip(&path.rho_mis).enumerate() {
        for (j, (_, x)) in observables.iter().enumerate() {
            out[j * n_t + k] = (a.expect(x) - b.expect(x)).re.abs();
        }
        out[observables.len() * n_t + k] = a.trace_distance(b)?;
    }
    Ok(out)
}

/// Runs both gate checks, simulates `n_paths` filter pairs and averages the
/// per-observable absolute differences and the trace distance over paths.
pub fn run_stability(exp: &Experiment) -> Result<StabilityReport> {
    let space = observable_space(&exp.model, exp.tolerances.rank)?;
    let ac = is_absolutely_continuous(&exp.rho_true, &exp.rho_filter, exp.tolerances.kernel)?;
    let mut warnings = Vec::new();
    if !space.is_full() {
        warnings.push(format!(
            "model is not observable (dim O = {})",
            space.dimension
        ));
    }
    if !ac {
        warnings.push("rho_true is not absolutely continuous w.r.t. rho_filter".into());
    }
    if let Some(w) = exp.grid.coarseness_warning(&exp.model) {
        warnings.push(w);
    }
    for w in &warnings {
        warn!("{w}");
    }

    let kernel = FilterKernel::new(&exp.model);
    let times = exp.grid.stored_times();
    let n_metrics = exp.observables.len() + 1;
    let mut moments = Moments::new(n_metrics * times.len());
    let mut meta = RunMetadata {
        observable: space.is_full(),
        observable_dim: space.dimension,
        dim_p: space.dim_p,
        observability_borderline: space.is_borderline(),
        absolutely_continuous: ac,
        n_paths: exp.n_paths,
        completed_paths: 0,
        aborted_paths: 0,
        clip_events_true: 0,
        clip_events_filter: 0,
        max_jump_probability: 0.0,
        master_seed: exp.master_seed,
        dt: exp.grid.dt(),
        n_steps: exp.grid.n_steps(),
        warnings,
    };

    let indices: Vec<u64> = (0..exp.n_paths as u64).collect();
    for batch in indices.chunks(BATCH) {
        let results: Vec<Result<Option<PathSummary>>> = batch
            .par_iter()
            .map(|&i| {
                let seed = SeedSpec::new(exp.master_seed, i);
                match simulate_pair_with(
                    &kernel,
                    &exp.model,
                    &exp.rho_true,
                    &exp.rho_filter,
                    &exp.grid,
                    seed,
                ) {
                    Ok(path) => Ok(Some((
                        path_metrics(&path, &exp.observables)?,
                        path.diagnostics,
                    ))),
                    Err(Error::MisspecifiedDarkJump { step, time }) => {
                        info!("path {i} aborted at step {step} (t = {time})");
                        Ok(None)
                    }
                    Err(e) => Err(e),
                }
            })
            .collect();
        for r in results {
            match r? {
                Some((values, diag)) => {
                    moments.add(&values);
                    meta.completed_paths += 1;
                    meta.clip_events_true += diag.clip_events_true;
                    meta.clip_events_filter += diag.clip_events_mis;
                    meta.max_jump_probability =
                        meta.max_jump_probability.max(diag.max_jump_probability);
                }
                None => meta.aborted_paths += 1,
            }
        }
    }
    if meta.aborted_paths > 0 {
        let msg = format!(
            "{} of {} paths aborted on a misspecified dark-state jump",
            meta.aborted_paths, exp.n_paths
        );
        warn!("{msg}");
        meta.warnings.push(msg);
    }

    let (mean, stderr) = moments.mean_and_stderr();
    let n_t = times.len();
    let split = |v: &[f64]| -> Vec<Vec<f64>> { v.chunks(n_t).map(<[f64]>::to_vec).collect() };
    let mut mean_abs_diff = split(&mean);
    let mut stderr_obs = split(&stderr);
    let trace_distance = mean_abs_diff.pop().unwrap_or_default();
    let stderr_trace_distance = stderr_obs.pop().unwrap_or_default();

    Ok(StabilityReport {
        times,
        observable_names: exp.observables.iter().map(|(n, _)| n.clone()).collect(),
        mean_abs_diff,
        stderr: stderr_obs,
        trace_distance,
        stderr_trace_distance,
        metadata: meta,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionResidual {
    pub name: String,
    pub residual_norm: f64,
    pub in_space: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObservabilityReport {
    pub observable: bool,
    pub dimension: usize,
    pub dim_p: usize,
    pub full_dimension: usize,
    pub iterations_used: usize,
    pub dimension_history: Vec<usize>,
    pub borderline_singular_values: Vec<f64>,
    pub tol_rel: f64,
    pub basis: Vec<BasisElement>,
    pub projections: Vec<ProjectionResidual>,
}

pub fn run_observability_report(exp: &Experiment) -> Result<ObservabilityReport> {
    let space: ObservableSpace = observable_space(&exp.model, exp.tolerances.rank)?;
    if space.is_borderline() {
        warn!(
            "observability verdict is tolerance-sensitive: {:?}",
            space.borderline_singular_values
        );
    }
    let projections = exp
        .observables
        .iter()
        .map(|(name, x)| {
            let pr = project_observable(&space, x)?;
            Ok(ProjectionResidual {
                name: name.clone(),
                residual_norm: pr.residual_norm,
                in_space: pr.is_member(10.0 * space.tol_rel),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ObservabilityReport {
        observable: space.is_full(),
        dimension: space.dimension,
        dim_p: space.dim_p,
        full_dimension: space.dim_p * space.dim_p,
        iterations_used: space.iterations_used,
        dimension_history: space.dimension_history.clone(),
        borderline_singular_values: space.borderline_singular_values.clone(),
        tol_rel: space.tol_rel,
        basis: space.basis.iter().map(BasisElement::from).collect(),
        projections,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AbsContReport {
    pub absolutely_continuous: bool,
    pub kernel_dim_true: usize,
    pub kernel_dim_filter: usize,
    /// `eps` with `rho_filter >= eps rho_true`, when continuity holds.
    pub domination_constant: Option<f64>,
    pub tol_abs: f64,
}

pub fn run_abscont_report(exp: &Experiment) -> Result<AbsContReport> {
    let tol = exp.tolerances.kernel;
    Ok(AbsContReport {
        absolutely_continuous: is_absolutely_continuous(&exp.rho_true, &exp.rho_filter, tol)?,
        kernel_dim_true: kernel(&exp.rho_true, tol)?.dimension(),
        kernel_dim_filter: kernel(&exp.rho_filter, tol)?.dimension(),
        domination_constant: domination_constant(&exp.rho_true, &exp.rho_filter, tol)?,
        tol_abs: tol,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharFnRow {
    pub grid_id: usize,
    pub exact: C64,
    pub estimate: McEstimate,
    pub zscore: f64,
}

impl CharFnRow {
    pub fn passes(&self) -> bool {
        self.zscore <= ZSCORE_LIMIT
    }
}

/// Compares exact characteristic functions of the observations under
/// `rho_true` with Monte Carlo estimates from `n_paths` simulated records.
pub fn run_charfn_check(exp: &Experiment) -> Result<Vec<CharFnRow>> {
    if exp.charfn_grids.is_empty() {
        return Err(Error::Config("no charfn_grids given".into()));
    }
    let estimates = mc_char_fn(
        &exp.model,
        &exp.rho_true,
        &exp.charfn_grids,
        exp.grid.dt(),
        exp.n_paths,
        exp.master_seed,
    )?;
    exp.charfn_grids
        .iter()
        .zip(estimates)
        .enumerate()
        .map(|(grid_id, (g, estimate))| {
            let exact = char_fn(&exp.model, &exp.rho_true, g)?;
            Ok(CharFnRow {
                grid_id,
                exact,
                estimate,
                zscore: estimate.z_score(exact),
            })
        })
        .collect()
}

fn create_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_stability_csv(report: &StabilityReport, path: &Path) -> Result<()> {
    let mut w = create_writer(path)?;
    let mut header = vec!["t".to_string()];
    for name in &report.observable_names {
        header.push(format!("mean_abs_diff_{name}"));
        header.push(format!("stderr_{name}"));
    }
    header.push("trace_distance".into());
    header.push("stderr_trace_distance".into());
    w.write_record(&header)?;
    for (k, t) in report.times.iter().enumerate() {
        let mut row = vec![t.to_string()];
        for j in 0..report.observable_names.len() {
            row.push(report.mean_abs_diff[j][k].to_string());
            row.push(report.stderr[j][k].to_string());
        }
        row.push(report.trace_distance[k].to_string());
        row.push(report.stderr_trace_distance[k].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_charfn_csv(rows: &[CharFnRow], path: &Path) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record([
        "grid_id", "exact_re", "exact_im", "mc_re", "mc_im", "stderr", "zscore",
    ])?;
    for r in rows {
        w.write_record([
            r.grid_id.to_string(),
            r.exact.re.to_string(),
            r.exact.im.to_string(),
            r.estimate.mean.re.to_string(),
            r.estimate.mean.im.to_string(),
            r.estimate.stderr.to_string(),
            r.zscore.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one filter pair: the observation increment leading into each
/// stored time, expectations of every tracked observable under both
/// filters, and their trace distance.
pub fn write_trajectory_csv(
    path_data: &FilterPairPath,
    observables: &[(String, crate::ComplexMatrix)],
    stride: usize,
    path: &Path,
) -> Result<()> {
    let mut w = create_writer(path)?;
    let mut header = vec!["t".to_string(), "y".to_string()];
    for (name, _) in observables {
        header.push(format!("true_{name}"));
        header.push(format!("filter_{name}"));
    }
    header.push("trace_distance".into());
    w.write_record(&header)?;
    let y = path_data.observations.cumulative();
    for (k, t) in path_data.times.iter().enumerate() {
        let (a, b) = (&path_data.rho_true[k], &path_data.rho_mis[k]);
        let mut row = vec![t.to_string(), y[k * stride].to_string()];
        for (_, x) in observables {
            row.push(a.expect(x).re.to_string());
            row.push(b.expect(x).re.to_string());
        }
        row.push(a.trace_distance(b)?.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}
