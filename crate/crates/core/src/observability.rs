//! Observable space of a model and the observability rank test.
//!
//! The observable space is the smallest subspace of `M_p` containing the
//! identity and invariant under the generator and the measurement
//! superoperator. It is computed by growing `Z_0 = span{I}`,
//! `Z_n = span{Z_{n-1}, L[Z_{n-1}], K[Z_{n-1}]}` until the dimension stops
//! increasing. The model is observable iff the fixed point is all of `M_p`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matops::{
    c64, devectorize, hs_inner, numerical_rank, vectorize, ComplexMatrix, VectorizedMatrix, C64,
};
use crate::model::{generator, measurement_superop, QsdeModel, Superoperator};

pub use crate::matops::DEFAULT_RANK_TOL;

/// Multiplier on `tol_rel` used when checking invariance of the span.
const INVARIANCE_SLACK: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct ObservableSpace {
    pub dim_p: usize,
    /// Hilbert-Schmidt orthonormal.
    pub basis: Vec<ComplexMatrix>,
    pub dimension: usize,
    pub iterations_used: usize,
    /// `dim Z_0, dim Z_1, ...` up to and including the fixed point.
    pub dimension_history: Vec<usize>,
    /// Singular values that fell within a factor of ten of the rank cutoff
    /// in any iteration. Non-empty means the verdict is tolerance-sensitive.
    pub borderline_singular_values: Vec<f64>,
    pub tol_rel: f64,
}

impl ObservableSpace {
    pub fn is_full(&self) -> bool {
        self.dimension == self.dim_p * self.dim_p
    }

    pub fn is_borderline(&self) -> bool {
        !self.borderline_singular_values.is_empty()
    }
}

pub fn observable_space(m: &QsdeModel, tol_rel: f64) -> Result<ObservableSpace> {
    let p = m.dim();
    let gen = generator(m);
    let meas = measurement_superop(m);

    let unit = vectorize(&crate::matops::identity(p).unscale((p as f64).sqrt()))?;
    let mut basis: Vec<VectorizedMatrix> = vec![unit];
    let mut history = vec![1];
    let mut borderline = Vec::new();
    let mut iterations = 0;

    // dim Z_n <= p^2, so at most p^2 passes grow the span; one more confirms.
    for _ in 0..=p * p {
        iterations += 1;
        let mut candidates = basis.clone();
        for op in [&gen, &meas] {
            for b in &basis {
                let image = op.matrix() * b.coords();
                candidates.push(VectorizedMatrix::from_coords(p, image)?);
            }
        }
        let ranked = numerical_rank(&candidates, tol_rel)?;
        borderline.extend(ranked.borderline());
        if ranked.rank <= basis.len() {
            break;
        }
        basis = ranked.basis;
        history.push(basis.len());
    }

    Ok(ObservableSpace {
        dim_p: p,
        dimension: basis.len(),
        basis: basis.iter().map(devectorize).collect(),
        iterations_used: iterations,
        dimension_history: history,
        borderline_singular_values: borderline,
        tol_rel,
    })
}

pub fn is_observable(m: &QsdeModel, tol_rel: f64) -> Result<bool> {
    Ok(observable_space(m, tol_rel)?.is_full())
}

#[derive(Debug, Clone)]
pub struct ObservableProjection {
    pub projection: ComplexMatrix,
    /// Hilbert-Schmidt norm of `X - projection`.
    pub residual_norm: f64,
    pub norm: f64,
}

impl ObservableProjection {
    /// `X` is declared to lie in the space when the residual is at most
    /// `tol` times its norm.
    pub fn is_member(&self, tol: f64) -> bool {
        self.residual_norm <= tol * self.norm.max(f64::MIN_POSITIVE)
    }
}

pub fn project_observable(
    space: &ObservableSpace,
    x: &ComplexMatrix,
) -> Result<ObservableProjection> {
    let p = space.dim_p;
    if x.shape() != (p, p) {
        return Err(Error::ShapeMismatch {
            expected: format!("{p}x{p}"),
            found: format!("{}x{}", x.nrows(), x.ncols()),
        });
    }
    let mut projection = ComplexMatrix::zeros(p, p);
    for b in &space.basis {
        let coeff: C64 = hs_inner(b, x)?;
        projection += b * coeff;
    }
    let residual_norm = (x - &projection).norm();
    Ok(ObservableProjection {
        projection,
        residual_norm,
        norm: x.norm(),
    })
}

/// Largest residual of `L[b]` and `K[b]` (or `J[b]`) outside the span,
/// over basis elements `b`, together with the operator scale it should be
/// compared against.
pub fn invariance_residual(space: &ObservableSpace, m: &QsdeModel) -> Result<(f64, f64)> {
    let ops: [Superoperator; 2] = [generator(m), measurement_superop(m)];
    let scale = ops.iter().map(|op| op.matrix().norm()).fold(1.0, f64::max);
    let mut worst: f64 = 0.0;
    for op in &ops {
        for b in &space.basis {
            let image = op.apply(b)?;
            worst = worst.max(project_observable(space, &image)?.residual_norm);
        }
    }
    Ok((worst, scale))
}

/// Whether the span is closed under both superoperators to
/// `10 * tol_rel * scale`.
pub fn is_invariant(space: &ObservableSpace, m: &QsdeModel) -> Result<bool> {
    let (resid, scale) = invariance_residual(space, m)?;
    Ok(resid <= INVARIANCE_SLACK * space.tol_rel * scale)
}

/// A Hermitian direction orthogonal to the observable space, if any.
/// Two states differing by a multiple of it have equal observation laws.
pub fn unobservable_direction(space: &ObservableSpace) -> Option<ComplexMatrix> {
    let p = space.dim_p;
    if space.is_full() {
        return None;
    }
    // Hermitian matrix units, projected off the span; the span is closed
    // under adjoints so the residual of a Hermitian input stays Hermitian.
    let mut candidates = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in i..p {
            let mut e = ComplexMatrix::zeros(p, p);
            e[(i, j)] = c64(1.0, 0.0);
            e[(j, i)] = c64(1.0, 0.0);
            candidates.push(e.clone());
            if i != j {
                let mut f = ComplexMatrix::zeros(p, p);
                f[(i, j)] = c64(0.0, -1.0);
                f[(j, i)] = c64(0.0, 1.0);
                candidates.push(f);
            }
        }
    }
    candidates
        .into_iter()
        .filter_map(|e| {
            project_observable(space, &e)
                .ok()
                .map(|pr| &e - pr.projection)
        })
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .filter(|r| r.norm() > 1e-8)
        .map(|r| {
            let adj = r.adjoint();
            let h = (r + adj).unscale(2.0);
            let n = h.norm();
            h.unscale(n)
        })
}

/// Coordinates used for the JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct BasisElement {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&ComplexMatrix> for BasisElement {
    fn from(m: &ComplexMatrix) -> Self {
        let rows = |f: fn(&C64) -> f64| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        BasisElement {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}
