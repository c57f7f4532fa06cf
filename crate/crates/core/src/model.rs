//! Finite-dimensional quantum stochastic models and their superoperators.
//!
//! A model is given by a Hamiltonian `H`, Lindblad operators
//! `L_1 .. L_q` (with `L_1` the monitored channel), a detection efficiency
//! `eta` and a detection mode. The scattering matrix is the identity.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::{
    c64, ensure_finite, ensure_square, hermitian_defect, hermitian_eig, identity,
    is_positive_definite_shifted, matrix_exp, max_abs, sandwich, trace, trace_product, vectorize,
    ComplexMatrix, HermitianMatrix, C64,
};

const NON_HERMITIAN_H_TOL: f64 = 1e-8;
const DENSITY_HERMITIAN_TOL: f64 = 1e-6;
/// Shift used by the Cholesky positivity probe.
const PSD_PROBE_SHIFT: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detection {
    Homodyne,
    Counting,
}

/// Validated model. Construct with [`QsdeModel::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct QsdeModel {
    hamiltonian: HermitianMatrix,
    lindblads: Vec<ComplexMatrix>,
    eta: f64,
    detection: Detection,
}

impl QsdeModel {
    /// Validates shapes, efficiency and self-adjointness of `H`, and
    /// symmetrizes `H`.
    pub fn new(
        hamiltonian: ComplexMatrix,
        lindblads: Vec<ComplexMatrix>,
        eta: f64,
        detection: Detection,
    ) -> Result<Self> {
        let p = ensure_square(&hamiltonian).map_err(|_| {
            Error::BadShape(format!(
                "Hamiltonian is {}x{}",
                hamiltonian.nrows(),
                hamiltonian.ncols()
            ))
        })?;
        if p == 0 {
            return Err(Error::BadShape("dimension must be positive".into()));
        }
        if lindblads.is_empty() {
            return Err(Error::BadShape(
                "at least one Lindblad operator (the monitored channel) is required".into(),
            ));
        }
        for (k, l) in lindblads.iter().enumerate() {
            if l.shape() != (p, p) {
                return Err(Error::BadShape(format!(
                    "L_{} is {}x{}, expected {p}x{p}",
                    k + 1,
                    l.nrows(),
                    l.ncols()
                )));
            }
            ensure_finite(l)?;
        }
        ensure_finite(&hamiltonian)?;
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::BadEta(eta));
        }
        let asymmetry = hermitian_defect(&hamiltonian);
        if asymmetry > NON_HERMITIAN_H_TOL * (1.0 + max_abs(&hamiltonian)) {
            return Err(Error::NonHermitianH { asymmetry });
        }
        Ok(Self {
            hamiltonian: HermitianMatrix::symmetrized(hamiltonian),
            lindblads,
            eta,
            detection,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &HermitianMatrix {
        &self.hamiltonian
    }

    pub fn lindblads(&self) -> &[ComplexMatrix] {
        &self.lindblads
    }

    /// The monitored channel `L_1`.
    pub fn monitored(&self) -> &ComplexMatrix {
        &self.lindblads[0]
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn detection(&self) -> Detection {
        self.detection
    }

    /// `L_1 + L_1^*` for homodyne detection, `L_1^* L_1` for counting.
    pub fn measurement_observable(&self) -> ComplexMatrix {
        let l = self.monitored();
        match self.detection {
            Detection::Homodyne => l + l.adjoint(),
            Detection::Counting => l.adjoint() * l,
        }
    }

    /// The same model in the basis `U`: `H -> U H U^*`, `L_k -> U L_k U^*`.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Result<Self> {
        let conj = |m: &ComplexMatrix| u * m * u.adjoint();
        Self::new(
            conj(self.hamiltonian.as_matrix()),
            self.lindblads.iter().map(conj).collect(),
            self.eta,
            self.detection,
        )
    }
}

/// Reference models used in examples, tests and the acceptance suite.
pub mod presets {
    use super::*;
    use crate::matops::{pauli_x, pauli_z, real_diagonal, zeros};

    /// `H = 0`, `L_1 = F/2` with `F = diag(1, .., p)`, homodyne, `eta = 1`.
    /// Not observable for `p >= 2`; every basis projector is a fixed point
    /// of the filter.
    pub fn diagonal_counterexample(p: usize) -> QsdeModel {
        let f: Vec<f64> = (1..=p).map(|k| k as f64 / 2.0).collect();
        QsdeModel::new(zeros(p), vec![real_diagonal(&f)], 1.0, Detection::Homodyne)
            .expect("valid preset")
    }

    /// `F = diag(1, .., p)`.
    pub fn counterexample_observable(p: usize) -> ComplexMatrix {
        real_diagonal(&(1..=p).map(|k| k as f64).collect::<Vec<_>>())
    }

    /// Homodyne qubit with `L_1 = sigma_z`, `H = sigma_x + sigma_z`; observable.
    pub fn observable_qubit() -> QsdeModel {
        QsdeModel::new(
            pauli_x() + pauli_z(),
            vec![pauli_z()],
            1.0,
            Detection::Homodyne,
        )
        .expect("valid preset")
    }

    /// `p = 1`, `L_1 = 0`: the homodyne record is a standard Wiener process.
    pub fn wiener() -> QsdeModel {
        QsdeModel::new(zeros(1), vec![zeros(1)], 1.0, Detection::Homodyne).expect("valid preset")
    }

    /// `p = 1`, `L_1 = 1`, counting: the record is Poisson with rate `eta`.
    pub fn poisson(eta: f64) -> QsdeModel {
        QsdeModel::new(zeros(1), vec![identity(1)], eta, Detection::Counting).expect("valid preset")
    }
}

/// Unit-trace positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(HermitianMatrix);

/// Outcome of projecting an arbitrary matrix onto the density matrices.
#[derive(Debug, Clone)]
pub(crate) struct Projection {
    pub rho: DensityMatrix,
    pub clipped: bool,
    /// Trace after symmetrization and clipping, before renormalization.
    pub raw_trace: f64,
}

impl DensityMatrix {
    /// Symmetrizes, clips negative eigenvalues and renormalizes the trace.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        ensure_square(&m)?;
        ensure_finite(&m)?;
        let asymmetry = hermitian_defect(&m);
        if asymmetry > DENSITY_HERMITIAN_TOL * (1.0 + max_abs(&m)) {
            return Err(Error::NotHermitian { asymmetry });
        }
        Ok(Self::project(m)?.rho)
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        Self::new(crate::matops::real_diagonal(diag))
    }

    /// `e_k e_k^*` in dimension `p`.
    pub fn basis_state(p: usize, k: usize) -> Self {
        let mut m = ComplexMatrix::zeros(p, p);
        m[(k, k)] = c64(1.0, 0.0);
        DensityMatrix(HermitianMatrix::symmetrized(m))
    }

    /// `psi psi^* / |psi|^2`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(p: usize) -> Self {
        DensityMatrix(HermitianMatrix::symmetrized(identity(p).unscale(p as f64)))
    }

    pub(crate) fn project(m: ComplexMatrix) -> Result<Projection> {
        let h = HermitianMatrix::symmetrized(m);
        let (h, clipped) = if is_positive_definite_shifted(&h, PSD_PROBE_SHIFT) {
            (h, false)
        } else {
            let eig = hermitian_eig(&h)?;
            let clipped_vals = eig.values.map(|x| c64(x.max(0.0), 0.0));
            let rebuilt =
                &eig.vectors * ComplexMatrix::from_diagonal(&clipped_vals) * eig.vectors.adjoint();
            (HermitianMatrix::symmetrized(rebuilt), true)
        };
        let raw_trace = trace(h.as_matrix()).re;
        if !(raw_trace > 0.0) || !raw_trace.is_finite() {
            return Err(Error::ZeroTrace(raw_trace));
        }
        let rho = DensityMatrix(HermitianMatrix::symmetrized(
            h.into_inner().unscale(raw_trace),
        ));
        Ok(Projection {
            rho,
            clipped,
            raw_trace,
        })
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        self.0.as_matrix()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.0
    }

    /// `Tr[rho X]`.
    pub fn expect(&self, x: &ComplexMatrix) -> C64 {
        trace_product(self.as_matrix(), x)
    }

    pub fn trace(&self) -> f64 {
        trace(self.as_matrix()).re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eig(&self.0)?.values[0])
    }

    /// `1/2 |self - other|_1`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        let diff = HermitianMatrix::symmetrized(self.as_matrix() - other.as_matrix());
        Ok(0.5 * crate::matops::hermitian_trace_norm(&diff)?)
    }
}

/// Linear map on `p x p` matrices, as a `p^2 x p^2` matrix on
/// column-stacked coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim_p: usize,
    matrix: ComplexMatrix,
}

impl Superoperator {
    pub fn from_matrix(dim_p: usize, matrix: ComplexMatrix) -> Result<Self> {
        let n = dim_p * dim_p;
        if matrix.shape() != (n, n) {
            return Err(Error::ShapeMismatch {
                expected: format!("{n}x{n}"),
                found: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        ensure_finite(&matrix)?;
        Ok(Self { dim_p, matrix })
    }

    pub fn identity(dim_p: usize) -> Self {
        Self {
            dim_p,
            matrix: identity(dim_p * dim_p),
        }
    }

    pub fn zero(dim_p: usize) -> Self {
        Self {
            dim_p,
            matrix: ComplexMatrix::zeros(dim_p * dim_p, dim_p * dim_p),
        }
    }

    /// `X -> A X B`.
    pub fn sandwich(a: &ComplexMatrix, b: &ComplexMatrix) -> Self {
        Self {
            dim_p: a.nrows(),
            matrix: sandwich(a, b),
        }
    }

    pub fn dim_p(&self) -> usize {
        self.dim_p
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let p = self.dim_p;
        if x.shape() != (p, p) {
            return Err(Error::ShapeMismatch {
                expected: format!("{p}x{p}"),
                found: format!("{}x{}", x.nrows(), x.ncols()),
            });
        }
        let out = &self.matrix * vectorize(x)?.coords();
        Ok(ComplexMatrix::from_column_slice(p, p, out.as_slice()))
    }

    pub fn plus(&self, other: &Superoperator) -> Self {
        Self {
            dim_p: self.dim_p,
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            dim_p: self.dim_p,
            matrix: &self.matrix * c,
        }
    }

    /// `e^{t S}`.
    pub fn exp(&self, t: f64) -> Result<Self> {
        Ok(Self {
            dim_p: self.dim_p,
            matrix: matrix_exp(&(&self.matrix * c64(t, 0.0)))?,
        })
    }

    /// The map `S_*` with `Tr[S_*(rho) X] = Tr[rho S(X)]`.
    pub fn predual(&self) -> Self {
        let p = self.dim_p;
        // Index of X_ji given the index of X_ij.
        let transpose_index = |k: usize| (k % p) * p + k / p;
        let n = p * p;
        let matrix = ComplexMatrix::from_fn(n, n, |a, b| {
            self.matrix[(transpose_index(b), transpose_index(a))]
        });
        Self { dim_p: p, matrix }
    }
}

/// Heisenberg-picture generator
/// `L[X] = i[H, X] + sum_k (L_k^* X L_k - 1/2 {L_k^* L_k, X})`.
pub fn generator(m: &QsdeModel) -> Superoperator {
    let p = m.dim();
    let id = identity(p);
    let h = m.hamiltonian().as_matrix();
    let i = c64(0.0, 1.0);
    let mut out = (sandwich(h, &id) - sandwich(&id, h)) * i;
    for l in m.lindblads() {
        let ld = l.adjoint();
        let ldl = &ld * l;
        out += sandwich(&ld, l);
        out -= (sandwich(&ldl, &id) + sandwich(&id, &ldl)) * c64(0.5, 0.0);
    }
    Superoperator {
        dim_p: p,
        matrix: out,
    }
}

/// `K[X] = L_1^* X + X L_1` (homodyne) or `J[X] = L_1^* X L_1` (counting).
pub fn measurement_superop(m: &QsdeModel) -> Superoperator {
    let p = m.dim();
    let id = identity(p);
    let l = m.monitored();
    let ld = l.adjoint();
    let matrix = match m.detection() {
        Detection::Homodyne => sandwich(&ld, &id) + sandwich(&id, l),
        Detection::Counting => sandwich(&ld, l),
    };
    Superoperator { dim_p: p, matrix }
}
