//! Observation records and quantum filters in state (density-matrix) form.
//!
//! The true filter generates the record: each increment is sampled from the
//! law predicted by the current true conditional state, then both the true
//! and the misspecified filter are advanced with that same increment.
//!
//! Steps are Euler-Maruyama on the normalized filter equation, followed by
//! symmetrization, clipping of negative eigenvalues and renormalization of
//! the trace.

use log::warn;
use nalgebra::{DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::abscont::{is_absolutely_continuous, DEFAULT_KERNEL_TOL};
use crate::error::{Error, Result};
use crate::matops::{trace_product, vectorize, ComplexMatrix, C64};
use crate::model::{generator, measurement_superop, DensityMatrix, Detection, QsdeModel};

/// Intensity below which a state is considered dark for the monitored channel.
pub const DARK_STATE_INTENSITY: f64 = 1e-12;
/// Per-step jump probability above which the grid is reported as too coarse.
pub const COARSE_JUMP_PROBABILITY: f64 = 0.1;
/// `dt |L|` above which the grid is reported as too coarse.
pub const COARSE_GENERATOR_STEP: f64 = 0.1;
const MAX_TRACE_DEVIATION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationGrid {
    dt: f64,
    n_steps: usize,
    stride: usize,
}

impl Default for SimulationGrid {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            n_steps: 10_000,
            stride: 1,
        }
    }
}

impl SimulationGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be positive".into()));
        }
        Ok(Self {
            dt,
            n_steps,
            stride: 1,
        })
    }

    /// Store every `stride`-th grid point (plus `t = 0`).
    pub fn with_stride(self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidGrid("stride must be positive".into()));
        }
        Ok(Self { stride, ..self })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    /// Times of the stored grid points.
    pub fn stored_times(&self) -> Vec<f64> {
        (0..=self.n_steps)
            .step_by(self.stride)
            .map(|k| k as f64 * self.dt)
            .collect()
    }

    pub fn coarseness_warning(&self, m: &QsdeModel) -> Option<String> {
        let scale = generator(m).matrix().norm();
        (self.dt * scale > COARSE_GENERATOR_STEP).then(|| {
            format!(
                "dt * |L| = {:.3} exceeds {COARSE_GENERATOR_STEP}; refine the grid",
                self.dt * scale
            )
        })
    }
}

/// Identifies one path's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub path_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        Self {
            master_seed,
            path_index,
        }
    }

    /// ChaCha stream selected by `path_index` under the key derived from
    /// `master_seed`.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.path_index);
        rng
    }
}

/// Per-step observation increments: `dY` for homodyne detection, `0` or
/// `1` for photon counting.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub detection: Detection,
    pub dt: f64,
    pub increments: Vec<f64>,
}

impl ObservationRecord {
    pub fn new(detection: Detection, dt: f64, increments: Vec<f64>) -> Self {
        Self {
            detection,
            dt,
            increments,
        }
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.increments.len() as f64
    }

    /// Number of steps up to time `t`; `t` must sit on the grid.
    pub fn step_index(&self, t: f64) -> Result<usize> {
        let x = t / self.dt;
        let k = x.round();
        if (x - k).abs() > 1e-6 {
            return Err(Error::GridMisaligned {
                time: t,
                reason: format!("not a multiple of dt = {}", self.dt),
            });
        }
        if k < 0.0 || k as usize > self.increments.len() {
            return Err(Error::GridMisaligned {
                time: t,
                reason: format!("record ends at {}", self.t_final()),
            });
        }
        Ok(k as usize)
    }

    /// `Y` at each grid point, starting from `Y_0 = 0`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        let mut y = 0.0;
        out.push(y);
        for inc in &self.increments {
            y += inc;
            out.push(y);
        }
        out
    }

    /// Sums consecutive blocks of `factor` increments: the same Brownian
    /// path on a grid with step `factor * dt`. Homodyne records only.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if self.detection != Detection::Homodyne {
            return Err(Error::WrongDetection(
                "only homodyne records can be coarsened",
            ));
        }
        if factor == 0 || !self.increments.len().is_multiple_of(factor) {
            return Err(Error::InvalidGrid(format!(
                "cannot coarsen {} steps by {factor}",
                self.len()
            )));
        }
        let increments = self
            .increments
            .chunks(factor)
            .map(|c| c.iter().sum())
            .collect();
        Ok(Self {
            detection: self.detection,
            dt: self.dt * factor as f64,
            increments,
        })
    }
}

/// Result of one filter step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub rho: DensityMatrix,
    /// Whether negative eigenvalues were clipped.
    pub clipped: bool,
}

/// Model matrices needed by the state-form filter, precomputed once.
#[derive(Debug, Clone)]
pub struct FilterKernel {
    detection: Detection,
    dim: usize,
    eta: f64,
    sqrt_eta: f64,
    /// Predual generator on column-stacked coordinates.
    drift: ComplexMatrix,
    l1: ComplexMatrix,
    l1_adj: ComplexMatrix,
    measurement: ComplexMatrix,
}

impl FilterKernel {
    pub fn new(m: &QsdeModel) -> Self {
        let l1 = m.monitored().clone();
        Self {
            detection: m.detection(),
            dim: m.dim(),
            eta: m.eta(),
            sqrt_eta: m.eta().sqrt(),
            drift: generator(m).predual().matrix().clone(),
            l1_adj: l1.adjoint(),
            l1,
            measurement: m.measurement_observable(),
        }
    }

    pub fn detection(&self) -> Detection {
        self.detection
    }

    /// `L_*(rho)`.
    fn lindblad_drift(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let p = self.dim;
        let v = &self.drift * DVector::from_column_slice(rho.as_slice());
        v.reshape_generic(Dyn(p), Dyn(p))
    }

    fn finish(&self, next: ComplexMatrix) -> Result<StepOutcome> {
        let proj = DensityMatrix::project(next)?;
        if (proj.raw_trace - 1.0).abs() > MAX_TRACE_DEVIATION {
            return Err(Error::StepTooLarge {
                trace: proj.raw_trace,
            });
        }
        Ok(StepOutcome {
            rho: proj.rho,
            clipped: proj.clipped,
        })
    }

    /// One homodyne step with observation increment `dy`.
    pub fn homodyne_step(&self, rho: &DensityMatrix, dy: f64, dt: f64) -> Result<StepOutcome> {
        if self.detection != Detection::Homodyne {
            return Err(Error::WrongDetection("homodyne step on a counting model"));
        }
        let r = rho.as_matrix();
        let mean = trace_product(&self.measurement, r).re;
        let l_rho = &self.l1 * r;
        let mut innovation_gain = &l_rho + l_rho.adjoint();
        innovation_gain -= r.scale(mean);
        let innovation = dy - self.sqrt_eta * mean * dt;

        let mut next = r + self.lindblad_drift(r).scale(dt);
        next += innovation_gain.scale(self.sqrt_eta * innovation);
        self.finish(next)
    }

    /// One counting step; `jumped` says whether a photon was detected.
    pub fn counting_step(&self, rho: &DensityMatrix, jumped: bool, dt: f64) -> Result<StepOutcome> {
        if self.detection != Detection::Counting {
            return Err(Error::WrongDetection("counting step on a homodyne model"));
        }
        let r = rho.as_matrix();
        let jump = &self.l1 * r * &self.l1_adj;
        let intensity = crate::matops::trace(&jump).re;
        if jumped {
            if intensity <= DARK_STATE_INTENSITY {
                return Err(Error::JumpFromDarkState { intensity });
            }
            return self.finish(jump.unscale(intensity));
        }
        let mut next = r + self.lindblad_drift(r).scale(dt);
        next -= (jump - r.scale(intensity)).scale(self.eta * dt);
        self.finish(next)
    }

    /// Dispatches on the detection mode; counting increments are `0` or `1`.
    pub fn step(&self, rho: &DensityMatrix, increment: f64, dt: f64) -> Result<StepOutcome> {
        match self.detection {
            Detection::Homodyne => self.homodyne_step(rho, increment, dt),
            Detection::Counting => self.counting_step(rho, increment > 0.5, dt),
        }
    }

    /// Samples the next increment under the true conditional state. Also
    /// returns the jump probability used (zero for homodyne).
    pub fn sample_increment<R: Rng + ?Sized>(
        &self,
        rho_true: &DensityMatrix,
        dt: f64,
        rng: &mut R,
    ) -> (f64, f64) {
        match self.detection {
            Detection::Homodyne => {
                let mean = trace_product(&self.measurement, rho_true.as_matrix()).re;
                let noise: f64 = rng.sample(StandardNormal);
                (self.sqrt_eta * mean * dt + dt.sqrt() * noise, 0.0)
            }
            Detection::Counting => {
                let intensity = trace_product(&self.measurement, rho_true.as_matrix())
                    .re
                    .max(0.0);
                let prob = (self.eta * intensity * dt).min(1.0);
                let u: f64 = rng.random();
                (if u < prob { 1.0 } else { 0.0 }, prob)
            }
        }
    }
}

pub fn homodyne_step(
    m: &QsdeModel,
    rho: &DensityMatrix,
    dy: f64,
    dt: f64,
) -> Result<DensityMatrix> {
    Ok(FilterKernel::new(m).homodyne_step(rho, dy, dt)?.rho)
}

pub fn counting_step(
    m: &QsdeModel,
    rho: &DensityMatrix,
    jumped: bool,
    dt: f64,
) -> Result<DensityMatrix> {
    Ok(FilterKernel::new(m).counting_step(rho, jumped, dt)?.rho)
}

/// Homodyne: `dY = sqrt(eta) Tr[(L_1 + L_1^*) rho] dt + sqrt(dt) N(0, 1)`.
/// Counting: `1` with probability `min(eta Tr[L_1 rho L_1^*] dt, 1)`, else `0`.
pub fn sample_observation_increment<R: Rng + ?Sized>(
    m: &QsdeModel,
    rho_true: &DensityMatrix,
    dt: f64,
    rng: &mut R,
) -> f64 {
    FilterKernel::new(m).sample_increment(rho_true, dt, rng).0
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathDiagnostics {
    pub clip_events_true: usize,
    pub clip_events_mis: usize,
    pub max_jump_probability: f64,
    pub absolutely_continuous: bool,
}

impl PathDiagnostics {
    pub fn coarse_jumps(&self) -> bool {
        self.max_jump_probability > COARSE_JUMP_PROBABILITY
    }
}

#[derive(Debug, Clone)]
pub struct FilterPairPath {
    pub times: Vec<f64>,
    pub rho_true: Vec<DensityMatrix>,
    pub rho_mis: Vec<DensityMatrix>,
    pub observations: ObservationRecord,
    pub diagnostics: PathDiagnostics,
}

fn check_state_dims(m: &QsdeModel, rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != m.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0} density matrix", m.dim()),
            found: format!("{0}x{0}", rho.dim()),
        });
    }
    Ok(())
}

/// Samples a record from the filter started at `rho1` and runs the filter
/// started at `rho2` on the same record.
///
/// A jump while the misspecified filter is dark aborts the run with
/// [`Error::MisspecifiedDarkJump`]; with `rho1 << rho2` this has
/// probability zero.
pub fn simulate_pair(
    m: &QsdeModel,
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    grid: &SimulationGrid,
    seed: SeedSpec,
) -> Result<FilterPairPath> {
    simulate_pair_with(&FilterKernel::new(m), m, rho1, rho2, grid, seed)
}

pub(crate) fn simulate_pair_with(
    kernel: &FilterKernel,
    m: &QsdeModel,
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    grid: &SimulationGrid,
    seed: SeedSpec,
) -> Result<FilterPairPath> {
    check_state_dims(m, rho1)?;
    check_state_dims(m, rho2)?;
    let absolutely_continuous = is_absolutely_continuous(rho1, rho2, DEFAULT_KERNEL_TOL)?;
    if !absolutely_continuous {
        warn!("true initial state is not absolutely continuous w.r.t. the filter's; stability is not guaranteed");
    }

    let dt = grid.dt();
    let n_stored = grid.n_steps() / grid.stride() + 1;
    let mut times = Vec::with_capacity(n_stored);
    let mut rho_true = Vec::with_capacity(n_stored);
    let mut rho_mis = Vec::with_capacity(n_stored);
    let mut increments = Vec::with_capacity(grid.n_steps());
    let mut diagnostics = PathDiagnostics {
        absolutely_continuous,
        ..Default::default()
    };

    let mut rng = seed.rng();
    let mut cur_true = rho1.clone();
    let mut cur_mis = rho2.clone();
    times.push(0.0);
    rho_true.push(cur_true.clone());
    rho_mis.push(cur_mis.clone());

    for k in 0..grid.n_steps() {
        let (inc, prob) = kernel.sample_increment(&cur_true, dt, &mut rng);
        diagnostics.max_jump_probability = diagnostics.max_jump_probability.max(prob);
        let next_true = kernel.step(&cur_true, inc, dt)?;
        let next_mis = kernel.step(&cur_mis, inc, dt).map_err(|e| match e {
            Error::JumpFromDarkState { .. } => Error::MisspecifiedDarkJump {
                step: k,
                time: (k + 1) as f64 * dt,
            },
            other => other,
        })?;
        diagnostics.clip_events_true += next_true.clipped as usize;
        diagnostics.clip_events_mis += next_mis.clipped as usize;
        cur_true = next_true.rho;
        cur_mis = next_mis.rho;
        increments.push(inc);
        if (k + 1) % grid.stride() == 0 {
            times.push((k + 1) as f64 * dt);
            rho_true.push(cur_true.clone());
            rho_mis.push(cur_mis.clone());
        }
    }
    if diagnostics.coarse_jumps() {
        warn!(
            "per-step jump probability reached {:.3} (> {COARSE_JUMP_PROBABILITY}); refine dt",
            diagnostics.max_jump_probability
        );
    }

    Ok(FilterPairPath {
        times,
        rho_true,
        rho_mis,
        observations: ObservationRecord::new(m.detection(), dt, increments),
        diagnostics,
    })
}

/// Samples an observation record only, without storing states.
pub fn simulate_observations(
    m: &QsdeModel,
    rho: &DensityMatrix,
    grid: &SimulationGrid,
    seed: SeedSpec,
) -> Result<ObservationRecord> {
    check_state_dims(m, rho)?;
    let kernel = FilterKernel::new(m);
    let dt = grid.dt();
    let mut rng = seed.rng();
    let mut cur = rho.clone();
    let mut increments = Vec::with_capacity(grid.n_steps());
    for _ in 0..grid.n_steps() {
        let (inc, _) = kernel.sample_increment(&cur, dt, &mut rng);
        cur = kernel.step(&cur, inc, dt)?.rho;
        increments.push(inc);
    }
    Ok(ObservationRecord::new(m.detection(), dt, increments))
}

/// Filter in Heisenberg (functional) form: tracks `pi(X)` for every `X`
/// through its values on matrix units, `pi(X) = w . vec(X)`.
///
/// The deterministic part is propagated with the Heisenberg semigroup
/// `e^{L dt}` acting on observables; the innovation term takes an Euler
/// step. No renormalization or positivity projection is applied.
#[derive(Debug, Clone)]
pub struct FunctionalFilter {
    detection: Detection,
    eta: f64,
    sqrt_eta: f64,
    dt: f64,
    /// Transpose of `e^{L dt}`.
    propagator_t: ComplexMatrix,
    /// Transpose of `K` (homodyne) or `J` (counting).
    measurement_t: ComplexMatrix,
    measurement_obs: DVector<C64>,
}

impl FunctionalFilter {
    pub fn new(m: &QsdeModel, dt: f64) -> Result<Self> {
        Ok(Self {
            detection: m.detection(),
            eta: m.eta(),
            sqrt_eta: m.eta().sqrt(),
            dt,
            propagator_t: generator(m).exp(dt)?.matrix().transpose(),
            measurement_t: measurement_superop(m).matrix().transpose(),
            measurement_obs: vectorize(&m.measurement_observable())?.coords().clone(),
        })
    }

    /// Functional `X -> Tr[rho X]`.
    pub fn initial(rho: &DensityMatrix) -> DVector<C64> {
        DVector::from_column_slice(rho.as_matrix().transpose().as_slice())
    }

    pub fn expect(w: &DVector<C64>, x: &ComplexMatrix) -> C64 {
        w.dot(&DVector::from_column_slice(x.as_slice()))
    }

    pub fn step(&self, w: &DVector<C64>, increment: f64) -> DVector<C64> {
        let mean = w.dot(&self.measurement_obs);
        let drifted = &self.propagator_t * w;
        let gain_applied = &self.measurement_t * w;
        match self.detection {
            Detection::Homodyne => {
                let innovation = increment - self.sqrt_eta * mean.re * self.dt;
                let gain = (gain_applied - w * mean) * C64::new(self.sqrt_eta * innovation, 0.0);
                drifted + gain
            }
            Detection::Counting => {
                let compensated = increment - self.eta * mean.re * self.dt;
                let gain = (gain_applied / mean - w) * C64::new(compensated, 0.0);
                drifted + gain
            }
        }
    }
}

/// Runs the state-form filter and the functional-form filter from `rho0`
/// on `record` and returns `max_k |Tr[rho_k X] - pi_k(X)|`.
pub fn functional_form_discrepancy(
    m: &QsdeModel,
    rho0: &DensityMatrix,
    x: &ComplexMatrix,
    record: &ObservationRecord,
) -> Result<f64> {
    let kernel = FilterKernel::new(m);
    let functional = FunctionalFilter::new(m, record.dt)?;
    let mut rho = rho0.clone();
    let mut w = FunctionalFilter::initial(rho0);
    let mut worst: f64 = 0.0;
    for &inc in &record.increments {
        rho = kernel.step(&rho, inc, record.dt)?.rho;
        w = functional.step(&w, inc);
        worst = worst.max((rho.expect(x) - FunctionalFilter::expect(&w, x)).norm());
    }
    Ok(worst)
}
