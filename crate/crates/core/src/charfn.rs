//! Finite-dimensional characteristic functions of the observation process.
//!
//! For times `0 < t_1 < ... < t_k` and frequencies `lambda_1..lambda_k` the
//! characteristic function is
//! `E[exp(i sum_l lambda_l (Y_{t_l} - Y_{t_{l-1}}))]`. It equals
//! `c Tr[rho Upsilon]` where
//! `Upsilon = e^{G(lambda_1) t_1} ... e^{G(lambda_k) (t_k - t_{k-1})} I`
//! is applied right to left, with
//!
//! * homodyne: `G(lambda) = L + i lambda sqrt(eta) K`,
//!   `c = exp(-1/2 sum_l lambda_l^2 (t_l - t_{l-1}))`;
//! * counting: `G(lambda) = L + (e^{i lambda} - 1) eta J`, `c = 1`.
//!
//! `Upsilon` depends only on the model, so two initial states give the same
//! characteristic functions whenever they agree on the observable space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::{c64, identity, trace_product, ComplexMatrix, C64};
use crate::model::{generator, measurement_superop, DensityMatrix, Detection, QsdeModel};
use crate::trajectories::{simulate_observations, ObservationRecord, SeedSpec, SimulationGrid};

/// Non-decreasing positive times with one frequency per time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct TimeLambdaGrid {
    times: Vec<f64>,
    lambdas: Vec<f64>,
}

#[derive(Deserialize)]
struct RawGrid {
    times: Vec<f64>,
    lambdas: Vec<f64>,
}

impl TryFrom<RawGrid> for TimeLambdaGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        Self::new(raw.times, raw.lambdas)
    }
}

impl TimeLambdaGrid {
    pub fn new(times: Vec<f64>, lambdas: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidGrid("at least one time is required".into()));
        }
        if times.len() != lambdas.len() {
            return Err(Error::InvalidGrid(format!(
                "{} times but {} frequencies",
                times.len(),
                lambdas.len()
            )));
        }
        if times.iter().chain(&lambdas).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if times[0] <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "first time must be positive, got {}",
                times[0]
            )));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidGrid("times must be non-decreasing".into()));
        }
        Ok(Self { times, lambdas })
    }

    /// Single time `t` with frequency `lambda`.
    pub fn single(t: f64, lambda: f64) -> Result<Self> {
        Self::new(vec![t], vec![lambda])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_final(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// `(lambda_l, t_l - t_{l-1})` with `t_0 = 0`.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let starts = std::iter::once(0.0).chain(self.times.iter().copied());
        self.lambdas
            .iter()
            .copied()
            .zip(self.times.iter().zip(starts).map(|(t, s)| t - s))
    }
}

/// The observable `Upsilon` whose expectation gives the characteristic function.
pub fn upsilon(m: &QsdeModel, grid: &TimeLambdaGrid) -> Result<ComplexMatrix> {
    let gen = generator(m);
    let meas = measurement_superop(m);
    let intervals: Vec<(f64, f64)> = grid.intervals().collect();
    let mut x = identity(m.dim());
    for &(lambda, dt) in intervals.iter().rev() {
        let coupling = match m.detection() {
            Detection::Homodyne => c64(0.0, lambda * m.eta().sqrt()),
            Detection::Counting => (c64(0.0, lambda).exp() - c64(1.0, 0.0)) * m.eta(),
        };
        let g = gen.plus(&meas.scaled(coupling));
        x = g.exp(dt)?.apply(&x)?;
    }
    Ok(x)
}

fn prefactor(m: &QsdeModel, grid: &TimeLambdaGrid) -> f64 {
    match m.detection() {
        Detection::Homodyne => {
            (-0.5 * grid.intervals().map(|(l, dt)| l * l * dt).sum::<f64>()).exp()
        }
        Detection::Counting => 1.0,
    }
}

/// Exact characteristic function of the observations under initial state `rho`.
pub fn char_fn(m: &QsdeModel, rho: &DensityMatrix, grid: &TimeLambdaGrid) -> Result<C64> {
    if rho.dim() != m.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0}", m.dim()),
            found: format!("{0}x{0}", rho.dim()),
        });
    }
    Ok(trace_product(rho.as_matrix(), &upsilon(m, grid)?) * prefactor(m, grid))
}

/// `exp(i sum_l lambda_l (Y_{t_l} - Y_{t_{l-1}}))` along one record.
pub fn path_phase(record: &ObservationRecord, grid: &TimeLambdaGrid) -> Result<C64> {
    let cumulative = record.cumulative();
    let mut phase = 0.0;
    let mut prev = 0.0;
    for (&t, &lambda) in grid.times().iter().zip(grid.lambdas()) {
        let y = cumulative[record.step_index(t)?];
        phase += lambda * (y - prev);
        prev = y;
    }
    Ok(c64(0.0, phase).exp())
}

/// Monte Carlo estimate of a complex mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: C64,
    /// Standard error of `mean`: `sqrt(sum |z - mean|^2 / (n (n - 1)))`,
    /// which coincides with the jackknife estimate. Zero when `n < 2`.
    pub stderr: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_samples(samples: &[C64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: c64(0.0, 0.0),
                stderr: 0.0,
                n,
            };
        }
        let mean = samples.iter().sum::<C64>() / n as f64;
        let stderr = if n < 2 {
            0.0
        } else {
            let ss: f64 = samples.iter().map(|z| (z - mean).norm_sqr()).sum();
            (ss / (n as f64 * (n as f64 - 1.0))).sqrt()
        };
        Self { mean, stderr, n }
    }

    /// `|mean - exact| / stderr`; infinite when the standard error is zero
    /// and the estimate differs.
    pub fn z_score(&self, exact: C64) -> f64 {
        let err = (self.mean - exact).norm();
        if self.stderr > 0.0 {
            err / self.stderr
        } else if err <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Monte Carlo characteristic functions from simulated records.
///
/// Each path is simulated once up to the latest grid time and reused for
/// every grid, so the estimates are correlated across grids. Paths use
/// streams `0..n_paths` of `master_seed`.
pub fn mc_char_fn(
    m: &QsdeModel,
    rho: &DensityMatrix,
    grids: &[TimeLambdaGrid],
    dt: f64,
    n_paths: usize,
    master_seed: u64,
) -> Result<Vec<McEstimate>> {
    if grids.is_empty() {
        return Err(Error::EmptyInput);
    }
    let horizon = grids
        .iter()
        .map(TimeLambdaGrid::t_final)
        .fold(0.0, f64::max);
    let n_steps = (horizon / dt).round() as usize;
    let sim = SimulationGrid::new(dt, n_steps)?;
    // Reject misaligned grids before spending time on paths.
    let probe = ObservationRecord::new(m.detection(), dt, vec![0.0; n_steps]);
    for g in grids {
        path_phase(&probe, g)?;
    }

    let phases: Vec<Vec<C64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let record = simulate_observations(m, rho, &sim, SeedSpec::new(master_seed, i))?;
            grids
                .iter()
                .map(|g| path_phase(&record, g))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    Ok((0..grids.len())
        .map(|j| {
            let column: Vec<C64> = phases.iter().map(|row| row[j]).collect();
            McEstimate::from_samples(&column)
        })
        .collect())
}
