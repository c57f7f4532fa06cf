//! JSON experiment configuration.
//!
//! Complex scalars are written either as plain numbers or as `[re, im]`;
//! matrices are row-major nested arrays. Density matrices may also be given
//! as `{"diag": [...]}` or `{"pure": [...]}`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::abscont::DEFAULT_KERNEL_TOL;
use crate::charfn::TimeLambdaGrid;
use crate::error::{Error, Result};
use crate::matops::{c64, ComplexMatrix, HermitianMatrix, C64, DEFAULT_RANK_TOL};
use crate::model::{DensityMatrix, Detection, QsdeModel};
use crate::trajectories::SimulationGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Scalar> for C64 {
    fn from(s: Scalar) -> C64 {
        match s {
            Scalar::Real(x) => c64(x, 0.0),
            Scalar::Complex([re, im]) => c64(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixSpec(pub Vec<Vec<Scalar>>);

impl MatrixSpec {
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let rows = self.0.len();
        if rows == 0 {
            return Err(Error::Config("empty matrix".into()));
        }
        let cols = self.0[0].len();
        if self.0.iter().any(|r| r.len() != cols) {
            return Err(Error::Config("ragged matrix rows".into()));
        }
        Ok(ComplexMatrix::from_fn(rows, cols, |i, j| {
            self.0[i][j].into()
        }))
    }

    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let entry = |z: C64| {
            if z.im == 0.0 {
                Scalar::Real(z.re)
            } else {
                Scalar::Complex([z.re, z.im])
            }
        };
        MatrixSpec(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| entry(m[(i, j)])).collect())
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Diag { diag: Vec<f64> },
    Pure { pure: Vec<Scalar> },
    Matrix(MatrixSpec),
}

impl StateSpec {
    pub fn to_density(&self) -> Result<DensityMatrix> {
        match self {
            StateSpec::Diag { diag } => DensityMatrix::from_diag(diag),
            StateSpec::Pure { pure } => {
                DensityMatrix::pure(&pure.iter().map(|&s| s.into()).collect::<Vec<C64>>())
            }
            StateSpec::Matrix(m) => DensityMatrix::new(m.to_matrix()?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub hamiltonian: MatrixSpec,
    pub lindblads: Vec<MatrixSpec>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub detection: Detection,
}

fn default_eta() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn to_model(&self) -> Result<QsdeModel> {
        let lindblads = self
            .lindblads
            .iter()
            .map(MatrixSpec::to_matrix)
            .collect::<Result<Vec<_>>>()?;
        QsdeModel::new(
            self.hamiltonian.to_matrix()?,
            lindblads,
            self.eta,
            self.detection,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
}

fn default_dt() -> f64 {
    SimulationGrid::default().dt()
}

fn default_steps() -> usize {
    SimulationGrid::default().n_steps()
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            n_steps: default_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub name: String,
    pub matrix: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_stride() -> usize {
    1
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            stride: default_stride(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative singular-value cutoff for the observability rank test.
    #[serde(default = "default_rank_tol")]
    pub rank: f64,
    /// Absolute eigenvalue cutoff for kernels of density matrices.
    #[serde(default = "default_kernel_tol")]
    pub kernel: f64,
}

fn default_rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}

fn default_kernel_tol() -> f64 {
    DEFAULT_KERNEL_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: DEFAULT_RANK_TOL,
            kernel: DEFAULT_KERNEL_TOL,
        }
    }
}

/// Experiment description as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub rho_true: Option<StateSpec>,
    pub rho_filter: Option<StateSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub charfn_grids: Vec<TimeLambdaGrid>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_paths() -> usize {
    1000
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Validates the configuration and builds the numerical objects.
    /// Missing states default to the maximally mixed state.
    pub fn build(&self) -> Result<Experiment> {
        let model = self.model.to_model()?;
        let p = model.dim();
        let state = |spec: &Option<StateSpec>| -> Result<DensityMatrix> {
            let rho = match spec {
                Some(s) => s.to_density()?,
                None => DensityMatrix::maximally_mixed(p),
            };
            if rho.dim() != p {
                return Err(Error::ShapeMismatch {
                    expected: format!("{p}x{p} state"),
                    found: format!("{0}x{0}", rho.dim()),
                });
            }
            Ok(rho)
        };
        let rho_true = state(&self.rho_true)?;
        let rho_filter = state(&self.rho_filter)?;
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be at least 1".into()));
        }
        let grid = SimulationGrid::new(self.grid.dt, self.grid.n_steps)?
            .with_stride(self.outputs.stride)?;
        if !(self.tolerances.rank > 0.0 && self.tolerances.kernel > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }

        let mut observables = Vec::with_capacity(self.observables.len() + 1);
        if !self.observables.iter().any(|o| o.name == "M") {
            observables.push(("M".to_string(), model.measurement_observable()));
        }
        for o in &self.observables {
            let x = o.matrix.to_matrix()?;
            if x.shape() != (p, p) {
                return Err(Error::ShapeMismatch {
                    expected: format!("{p}x{p} observable '{}'", o.name),
                    found: format!("{}x{}", x.nrows(), x.ncols()),
                });
            }
            HermitianMatrix::new(x.clone())?;
            if o.name.is_empty() || o.name.contains([',', '"', '\n']) {
                return Err(Error::Config(format!(
                    "invalid observable name '{}'",
                    o.name
                )));
            }
            observables.push((o.name.clone(), x));
        }
        let mut names: Vec<&str> = observables.iter().map(|(n, _)| n.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate observable names".into()));
        }

        Ok(Experiment {
            model,
            rho_true,
            rho_filter,
            grid,
            n_paths: self.n_paths,
            master_seed: self.master_seed,
            observables,
            out_dir: self.outputs.dir.clone(),
            charfn_grids: self.charfn_grids.clone(),
            tolerances: self.tolerances,
        })
    }
}

/// Validated experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: QsdeModel,
    pub rho_true: DensityMatrix,
    pub rho_filter: DensityMatrix,
    pub grid: SimulationGrid,
    pub n_paths: usize,
    pub master_seed: u64,
    /// Tracked observables; the measurement observable `M` is always present.
    pub observables: Vec<(String, ComplexMatrix)>,
    pub out_dir: PathBuf,
    pub charfn_grids: Vec<TimeLambdaGrid>,
    pub tolerances: Tolerances,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matops::{max_abs, real_diagonal};

    const COUNTEREXAMPLE: &str = r#"{
        "model": {
            "hamiltonian": [[0, 0], [0, 0]],
            "lindblads": [[[0.5, 0], [0, 1.0]]],
            "eta": 1.0,
            "detection": "homodyne"
        },
        "rho_true": {"diag": [1, 0]},
        "rho_filter": [[0, 0], [0, [1, 0]]],
        "grid": {"dt": 0.001, "n_steps": 100},
        "n_paths": 4,
        "master_seed": 7,
        "observables": [{"name": "F", "matrix": [[1, 0], [0, 2]]}],
        "outputs": {"dir": "results", "stride": 10}
    }"#;

    #[test]
    fn parses_and_builds() {
        let cfg = ExperimentConfig::from_json(COUNTEREXAMPLE).unwrap();
        assert_eq!(cfg.tolerances, Tolerances::default());
        let exp = cfg.build().unwrap();
        assert_eq!(exp.model.dim(), 2);
        assert_eq!(exp.observables.len(), 2);
        assert_eq!(exp.observables[0].0, "M");
        assert!(max_abs(&(&exp.observables[1].1 - real_diagonal(&[1.0, 2.0]))) == 0.0);
        assert_eq!(exp.grid.stride(), 10);
        assert_eq!(exp.rho_filter, DensityMatrix::basis_state(2, 1));
        assert_eq!(exp.out_dir, PathBuf::from("results"));
    }

    #[test]
    fn complex_entries_and_pure_states() {
        let spec: MatrixSpec = serde_json::from_str("[[1, [0, -1]], [[0, 1], 2]]").unwrap();
        let m = spec.to_matrix().unwrap();
        assert_eq!(m[(0, 1)], c64(0.0, -1.0));
        assert_eq!(m[(1, 0)], c64(0.0, 1.0));
        assert_eq!(MatrixSpec::from_matrix(&m).to_matrix().unwrap(), m);
        let s: StateSpec = serde_json::from_str(r#"{"pure": [1, [0, 1]]}"#).unwrap();
        let rho = s.to_density().unwrap();
        assert!((rho.as_matrix()[(0, 1)] - c64(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = |patch: &dyn Fn(&mut serde_json::Value)| {
            let mut v: serde_json::Value = serde_json::from_str(COUNTEREXAMPLE).unwrap();
            patch(&mut v);
            ExperimentConfig::from_json(&v.to_string())
                .and_then(|c| c.build())
                .unwrap_err()
        };
        assert!(matches!(
            bad(&|v| v["n_paths"] = 0.into()),
            Error::Config(_)
        ));
        assert!(matches!(
            bad(&|v| v["model"]["eta"] = 1.5.into()),
            Error::BadEta(_)
        ));
        assert!(matches!(
            bad(&|v| v["model"]["detection"] = "heterodyne".into()),
            Error::Config(_)
        ));
        assert!(matches!(
            bad(&|v| v["rho_true"] = serde_json::json!({"diag": [1, 0, 0]})),
            Error::ShapeMismatch { .. }
        ));
        assert!(matches!(
            bad(&|v| v["observables"][0]["matrix"] = serde_json::json!([[1, 1], [0, 1]])),
            Error::NotHermitian { .. }
        ));
        assert!(matches!(
            bad(&|v| v["grid"]["dt"] = (-1.0).into()),
            Error::InvalidGrid(_)
        ));
        assert!(matches!(
            bad(&|v| v["unknown"] = 1.into()),
            Error::Config(_)
        ));
        assert!(matches!(
            bad(&|v| v["charfn_grids"] = serde_json::json!([{"times": [0.0], "lambdas": [1.0]}])),
            Error::Config(_)
        ));
    }

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"model": {"hamiltonian": [[0]], "lindblads": [[[1]]], "detection": "counting"}}"#,
        )
        .unwrap();
        let exp = cfg.build().unwrap();
        assert_eq!(exp.n_paths, 1000);
        assert_eq!(exp.master_seed, 0);
        assert_eq!(exp.grid, SimulationGrid::default());
        assert_eq!(exp.model.eta(), 1.0);
        assert_eq!(exp.rho_true, DensityMatrix::maximally_mixed(1));
    }
}
