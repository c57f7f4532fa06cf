//! Absolute continuity of initial states at finite dimension.
//!
//! `rho_1 << rho_2` holds iff `ker rho_1` contains `ker rho_2`. When it
//! holds, `rho_2 >= eps rho_1` for `eps` the smallest nonzero eigenvalue of
//! `rho_2`, which is what makes the observation laws absolutely continuous.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matops::{hermitian_eig, HermitianMatrix, C64};
use crate::model::DensityMatrix;

/// Default absolute eigenvalue threshold for kernel membership.
pub const DEFAULT_KERNEL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    pub dim_p: usize,
    /// Orthonormal.
    pub vectors: Vec<DVector<C64>>,
}

impl SubspaceBasis {
    pub fn dimension(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Span of eigenvectors of `rho` with eigenvalue at most `tol_abs`.
pub fn kernel(rho: &DensityMatrix, tol_abs: f64) -> Result<SubspaceBasis> {
    let eig = hermitian_eig(rho.as_hermitian())?;
    let vectors = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, &lam)| lam <= tol_abs)
        .map(|(i, _)| eig.vectors.column(i).into_owned())
        .collect();
    Ok(SubspaceBasis {
        dim_p: rho.dim(),
        vectors,
    })
}

fn check_dims(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0}", a.dim()),
            found: format!("{0}x{0}", b.dim()),
        });
    }
    Ok(())
}

/// Whether `rho_1 << rho_2`: every kernel vector `v` of `rho_2` has
/// `|rho_1 v| <= tol_abs`.
pub fn is_absolutely_continuous(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    tol_abs: f64,
) -> Result<bool> {
    check_dims(rho1, rho2)?;
    let ker2 = kernel(rho2, tol_abs)?;
    Ok(ker2
        .vectors
        .iter()
        .all(|v| (rho1.as_matrix() * v).norm() <= tol_abs))
}

/// Largest `eps` certified by the kernel argument with `rho_2 >= eps rho_1`:
/// the smallest eigenvalue of `rho_2` above `tol_abs`. `None` when
/// absolute continuity fails.
pub fn domination_constant(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    tol_abs: f64,
) -> Result<Option<f64>> {
    if !is_absolutely_continuous(rho1, rho2, tol_abs)? {
        return Ok(None);
    }
    let eig = hermitian_eig(rho2.as_hermitian())?;
    Ok(eig.values.iter().copied().find(|&lam| lam > tol_abs))
}

/// Smallest eigenvalue of `rho_2 - eps rho_1`.
pub fn domination_margin(rho1: &DensityMatrix, rho2: &DensityMatrix, eps: f64) -> Result<f64> {
    check_dims(rho1, rho2)?;
    let diff =
        HermitianMatrix::symmetrized(rho2.as_matrix() - rho1.as_matrix() * C64::new(eps, 0.0));
    Ok(hermitian_eig(&diff)?.values[0])
}
