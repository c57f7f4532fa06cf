//! Dense complex linear algebra on `p x p` matrices and their `p^2`
//! coordinate vectors.
//!
//! Vectorization stacks columns: column `j` of `X` occupies coordinates
//! `p*j .. p*j + p`. Under this convention the map `X -> A X B` acts on
//! coordinates as `B^T (x) A`, see [`sandwich`].

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex matrix, stored column-major.
pub type ComplexMatrix = DMatrix<C64>;

/// Default relative tolerance for [`numerical_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

const HERMITIAN_TOL: f64 = 1e-8;
const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(p: usize) -> ComplexMatrix {
    ComplexMatrix::identity(p, p)
}

pub fn zeros(p: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(p, p)
}

/// Builds a matrix from row-major real entries.
pub fn real_matrix(rows: usize, cols: usize, entries: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_row_iterator(rows, cols, entries.iter().map(|&x| c64(x, 0.0)))
}

pub fn real_diagonal(diag: &[f64]) -> ComplexMatrix {
    let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| c64(x, 0.0)));
    ComplexMatrix::from_diagonal(&d)
}

pub fn pauli_x() -> ComplexMatrix {
    real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(
        2,
        2,
        &[c64(0.0, 0.0), c64(0.0, -1.0), c64(0.0, 1.0), c64(0.0, 0.0)],
    )
}

pub fn pauli_z() -> ComplexMatrix {
    real_diagonal(&[1.0, -1.0])
}

/// Lowering operator `e1 e2^*`, i.e. `[[0, 1], [0, 0]]`.
pub fn sigma_minus() -> ComplexMatrix {
    real_matrix(2, 2, &[0.0, 1.0, 0.0, 0.0])
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `Tr[A B]` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    // Tr[A B] = sum_ij A_ji B_ij
    let p = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..b.ncols() {
        for i in 0..p {
            acc += a[(j, i)] * b[(i, j)];
        }
    }
    acc
}

/// Returns the side length of a square matrix.
pub fn ensure_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn ensure_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn ensure_same_shape(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", a.nrows(), a.ncols()),
            found: format!("{}x{}", b.nrows(), b.ncols()),
        });
    }
    Ok(())
}

/// `max |A - A^*|` entrywise.
pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Self-adjoint matrix; construction symmetrizes `A <- (A + A^*)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Accepts `m` if its asymmetry is below `1e-8 (1 + |m|_max)` and
    /// symmetrizes it.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        ensure_square(&m)?;
        ensure_finite(&m)?;
        let defect = hermitian_defect(&m);
        if defect > HERMITIAN_TOL * (1.0 + max_abs(&m)) {
            return Err(Error::NotHermitian { asymmetry: defect });
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without checking how far `m` was from Hermitian.
    pub fn symmetrized(m: ComplexMatrix) -> Self {
        let adj = m.adjoint();
        HermitianMatrix((m + adj).unscale(2.0))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        HermitianMatrix(real_diagonal(diag))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }
}

impl AsRef<ComplexMatrix> for HermitianMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.0
    }
}

/// Column-stacked coordinates of a `p x p` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedMatrix {
    dim_p: usize,
    coords: DVector<C64>,
}

impl VectorizedMatrix {
    pub fn from_coords(dim_p: usize, coords: DVector<C64>) -> Result<Self> {
        if coords.len() != dim_p * dim_p {
            return Err(Error::ShapeMismatch {
                expected: format!("{} coordinates", dim_p * dim_p),
                found: format!("{} coordinates", coords.len()),
            });
        }
        Ok(Self { dim_p, coords })
    }

    pub fn dim_p(&self) -> usize {
        self.dim_p
    }

    pub fn coords(&self) -> &DVector<C64> {
        &self.coords
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

pub fn vectorize(x: &ComplexMatrix) -> Result<VectorizedMatrix> {
    let p = ensure_square(x)?;
    // nalgebra storage is column-major, which is exactly column stacking.
    Ok(VectorizedMatrix {
        dim_p: p,
        coords: DVector::from_column_slice(x.as_slice()),
    })
}

pub fn devectorize(v: &VectorizedMatrix) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(v.dim_p, v.dim_p, v.coords.as_slice())
}

/// Hilbert-Schmidt inner product `Tr[A^* B]`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<C64> {
    ensure_square(a)?;
    ensure_same_shape(a, b)?;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

pub fn hs_norm(a: &ComplexMatrix) -> f64 {
    a.norm()
}

/// Coordinate matrix of `X -> A X B`, namely `B^T (x) A`.
pub fn sandwich(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    b.transpose().kronecker(a)
}

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: ComplexMatrix,
}

/// Whether `a + shift I` is positive definite, by a Cholesky factorization
/// that fails on the first non-positive real pivot.
pub fn is_positive_definite_shifted(a: &HermitianMatrix, shift: f64) -> bool {
    let m = a.as_matrix();
    let p = m.nrows();
    let mut l = ComplexMatrix::zeros(p, p);
    for j in 0..p {
        let mut d = m[(j, j)].re + shift;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let djj = d.sqrt();
        l[(j, j)] = c64(djj, 0.0);
        for i in j + 1..p {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    true
}

pub fn hermitian_eig(a: &HermitianMatrix) -> Result<HermitianEigen> {
    let p = a.dim();
    let eig = SymmetricEigen::try_new(a.as_matrix().clone(), EIG_EPS, EIG_MAX_ITER)
        .ok_or(Error::ConvergenceFailure("hermitian eigendecomposition"))?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = ComplexMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

/// Sum of singular values of a Hermitian matrix.
pub fn hermitian_trace_norm(a: &HermitianMatrix) -> Result<f64> {
    Ok(hermitian_eig(a)?.values.iter().map(|x| x.abs()).sum())
}

#[derive(Debug, Clone)]
pub struct RankDecomposition {
    pub rank: usize,
    /// Orthonormal basis of the span, `rank` elements.
    pub basis: Vec<VectorizedMatrix>,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
}

impl RankDecomposition {
    /// Singular values within a factor of ten of the cutoff.
    pub fn borderline(&self) -> Vec<f64> {
        self.singular_values
            .iter()
            .copied()
            .filter(|&s| s > self.threshold / 10.0 && s < self.threshold * 10.0)
            .collect()
    }
}

/// Rank of the span of `vectors`: singular values above
/// `tol_rel * sigma_max` count.
pub fn numerical_rank(vectors: &[VectorizedMatrix], tol_rel: f64) -> Result<RankDecomposition> {
    let first = vectors.first().ok_or(Error::EmptyInput)?;
    if !(tol_rel > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "rank tolerance must be positive, got {tol_rel}"
        )));
    }
    let p = first.dim_p;
    let n = p * p;
    let mut stacked = ComplexMatrix::zeros(n, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        if v.dim_p != p {
            return Err(Error::ShapeMismatch {
                expected: format!("dim_p = {p}"),
                found: format!("dim_p = {}", v.dim_p),
            });
        }
        stacked.set_column(j, &v.coords);
    }
    let svd = SVD::try_new(stacked, true, false, EIG_EPS, EIG_MAX_ITER)
        .ok_or(Error::ConvergenceFailure("singular value decomposition"))?;
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let threshold = tol_rel * sigma_max;
    let rank = singular_values
        .iter()
        .filter(|&&s| s > threshold && s > 0.0)
        .count();
    let basis = order[..rank]
        .iter()
        .map(|&i| VectorizedMatrix {
            dim_p: p,
            coords: u.column(i).into_owned(),
        })
        .collect();
    Ok(RankDecomposition {
        rank,
        basis,
        singular_values,
        threshold,
    })
}

fn one_norm(m: &ComplexMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^M` by scaling and squaring (nalgebra's Pade-based `exp`), with
/// overflow reported as an error instead of non-finite entries.
pub fn matrix_exp(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(m)?;
    ensure_finite(m)?;
    // Beyond 2^1023 times the Pade radius the result cannot be finite.
    if one_norm(m) > 2f64.powi(1023) {
        return Err(Error::Overflow);
    }
    let r = m.exp();
    ensure_finite(&r).map_err(|_| Error::Overflow)?;
    Ok(r)
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    pub fn random_matrix<R: Rng>(rng: &mut R, p: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(p, p, |_, _| {
            c64(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            )
        })
    }

    pub fn random_hermitian<R: Rng>(rng: &mut R, p: usize) -> HermitianMatrix {
        HermitianMatrix::symmetrized(random_matrix(rng, p))
    }

    pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        use rand::SeedableRng;
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        max_abs(&(a - b)) <= tol
    }

    #[test]
    fn positive_definite_probe() {
        let h = |d: &[f64]| HermitianMatrix::new(real_diagonal(d)).unwrap();
        assert!(is_positive_definite_shifted(&h(&[1.0, 0.0]), 1e-11));
        assert!(!is_positive_definite_shifted(&h(&[1.0, -1e-3]), 1e-11));
        assert!(!is_positive_definite_shifted(&h(&[-2.0, 1.0]), 1e-11));
        let mut rng = rng(9);
        for _ in 0..50 {
            let a = test_util::random_hermitian(&mut rng, 4);
            let min = hermitian_eig(&a).unwrap().values[0];
            assert_eq!(is_positive_definite_shifted(&a, 0.0), min > 0.0);
        }
    }

    #[test]
    fn vectorize_roundtrip_and_convention() {
        let i2 = identity(2);
        let v = vectorize(&i2).unwrap();
        assert_eq!(
            v.coords().as_slice(),
            &[c64(1., 0.), c64(0., 0.), c64(0., 0.), c64(1., 0.)]
        );
        assert_eq!(devectorize(&v), i2);

        let x = real_matrix(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let coords: Vec<f64> = vectorize(&x)
            .unwrap()
            .coords()
            .iter()
            .map(|z| z.re)
            .collect();
        assert_eq!(coords, vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn vectorize_rejects_rectangular() {
        let x = ComplexMatrix::zeros(2, 3);
        assert!(matches!(
            vectorize(&x),
            Err(Error::NonSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn sandwich_matches_direct_multiplication() {
        let mut rng = rng(1);
        for _ in 0..10 {
            let (a, b, x) = (
                random_matrix(&mut rng, 3),
                random_matrix(&mut rng, 3),
                random_matrix(&mut rng, 3),
            );
            let direct = vectorize(&(&a * &x * &b)).unwrap();
            let via_kron = sandwich(&a, &b) * vectorize(&x).unwrap().coords();
            assert!((direct.coords() - via_kron).norm() < 1e-12 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn hs_inner_examples() {
        assert_eq!(hs_inner(&identity(3), &identity(3)).unwrap(), c64(3.0, 0.0));
        assert_eq!(hs_inner(&pauli_x(), &pauli_y()).unwrap(), c64(0.0, 0.0));
        assert!(matches!(
            hs_inner(&identity(2), &identity(3)),
            Err(Error::ShapeMismatch { .. })
        ));

        let mut rng = rng(2);
        for _ in 0..10 {
            let (a, b) = (random_matrix(&mut rng, 4), random_matrix(&mut rng, 4));
            let va = vectorize(&a).unwrap();
            let vb = vectorize(&b).unwrap();
            let dot: C64 = va
                .coords()
                .iter()
                .zip(vb.coords().iter())
                .map(|(x, y)| x.conj() * y)
                .sum();
            assert!((hs_inner(&a, &b).unwrap() - dot).norm() < 1e-12 * (1.0 + dot.norm()));
        }
    }

    #[test]
    fn vectorization_is_isometric() {
        let mut rng = rng(3);
        for _ in 0..100 {
            let x = random_matrix(&mut rng, 3);
            let lhs = vectorize(&x).unwrap().norm().powi(2);
            let rhs = hs_inner(&x, &x).unwrap();
            assert!(rhs.im.abs() < 1e-12 * lhs);
            assert!((lhs - rhs.re).abs() <= 1e-12 * lhs);
        }
    }

    #[test]
    fn hermitian_constructor_rejects_asymmetric() {
        let m = real_matrix(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            HermitianMatrix::new(m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn eig_small_examples() {
        let e = hermitian_eig(&HermitianMatrix::from_real_diagonal(&[2.0, 1.0])).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 2.0]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-14);

        let e = hermitian_eig(&HermitianMatrix::new(pauli_x()).unwrap()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
    }

    /// Characteristic polynomial coefficients by Faddeev-LeVerrier,
    /// highest degree first.
    fn char_poly(a: &ComplexMatrix) -> Vec<C64> {
        let n = a.nrows();
        let mut coeffs = vec![c64(1.0, 0.0)];
        let mut m = ComplexMatrix::zeros(n, n);
        let id = identity(n);
        for k in 1..=n {
            m = a * &m + &id * coeffs[k - 1];
            let c = -trace(&(a * &m)) / (k as f64);
            coeffs.push(c);
        }
        coeffs
    }

    /// Durand-Kerner simultaneous root iteration.
    fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
        let n = coeffs.len() - 1;
        let eval = |z: C64| coeffs.iter().fold(c64(0.0, 0.0), |acc, &c| acc * z + c);
        let seed = c64(0.4, 0.9);
        let mut roots: Vec<C64> = (0..n).map(|k| seed.powu(k as u32) * 3.0).collect();
        for _ in 0..2000 {
            for i in 0..n {
                let denom: C64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| roots[i] - roots[j])
                    .product();
                let step = eval(roots[i]) / denom;
                roots[i] -= step;
            }
        }
        roots
    }

    #[test]
    fn eig_matches_characteristic_polynomial_roots() {
        let mut rng = rng(4);
        for _ in 0..5 {
            let a = random_hermitian(&mut rng, 5);
            let e = hermitian_eig(&a).unwrap();
            let mut roots: Vec<f64> = poly_roots(&char_poly(a.as_matrix()))
                .iter()
                .map(|z| z.re)
                .collect();
            roots.sort_by(f64::total_cmp);
            for (x, y) in e.values.iter().zip(&roots) {
                assert!((x - y).abs() < 1e-8, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn eig_reconstructs_and_is_orthonormal() {
        let mut rng = rng(5);
        for p in 1..=6 {
            let a = random_hermitian(&mut rng, p);
            let e = hermitian_eig(&a).unwrap();
            let lam = ComplexMatrix::from_diagonal(&e.values.map(|x| c64(x, 0.0)));
            let recon = &e.vectors * lam * e.vectors.adjoint();
            let scale = 1.0 + max_abs(a.as_matrix());
            assert!(close(&recon, a.as_matrix(), 1e-10 * scale));
            assert!(close(
                &(e.vectors.adjoint() * &e.vectors),
                &identity(p),
                1e-10
            ));
        }
    }

    #[test]
    fn eig_of_psd_is_nonnegative() {
        let mut rng = rng(6);
        for _ in 0..50 {
            let b = random_matrix(&mut rng, 4);
            let psd = HermitianMatrix::symmetrized(&b * b.adjoint());
            let e = hermitian_eig(&psd).unwrap();
            let lmax = e.values[3];
            assert!(e.values[0] >= -1e-10 * lmax);
        }
    }

    #[test]
    fn rank_examples() {
        let v = |m: ComplexMatrix| vectorize(&m).unwrap();
        let r = numerical_rank(&[v(identity(2))], DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r.rank, 1);
        let r = numerical_rank(
            &[v(identity(2)), v(identity(2) * c64(2.0, 0.0))],
            DEFAULT_RANK_TOL,
        )
        .unwrap();
        assert_eq!(r.rank, 1);
        let paulis = [v(identity(2)), v(pauli_x()), v(pauli_y()), v(pauli_z())];
        let r = numerical_rank(&paulis, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r.rank, 4);
        let gram =
            ComplexMatrix::from_fn(4, 4, |i, j| r.basis[i].coords().dotc(r.basis[j].coords()));
        assert!(close(&gram, &identity(4), 1e-10));
        assert!(matches!(numerical_rank(&[], 1e-9), Err(Error::EmptyInput)));
    }

    #[test]
    fn rank_basis_spans_inputs() {
        let mut rng = rng(7);
        let a = vectorize(&random_matrix(&mut rng, 3)).unwrap();
        let b = vectorize(&random_matrix(&mut rng, 3)).unwrap();
        let c = VectorizedMatrix::from_coords(
            3,
            a.coords() * c64(0.5, -1.0) + b.coords() * c64(2.0, 0.0),
        )
        .unwrap();
        let r = numerical_rank(&[a.clone(), b, c], DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r.rank, 2);
        let mut resid = a.coords().clone();
        for q in &r.basis {
            resid -= q.coords() * q.coords().dotc(a.coords());
        }
        assert!(resid.norm() < 1e-12 * a.norm());
    }

    fn taylor_exp(m: &ComplexMatrix, terms: usize) -> ComplexMatrix {
        let n = m.nrows();
        let mut sum = identity(n);
        let mut term = identity(n);
        for k in 1..terms {
            term = &term * m / c64(k as f64, 0.0);
            sum += &term;
        }
        sum
    }

    #[test]
    fn exp_examples() {
        assert_eq!(matrix_exp(&zeros(3)).unwrap(), identity(3));
        let e = matrix_exp(&real_diagonal(&[0.3, -1.7])).unwrap();
        assert!(close(
            &e,
            &real_diagonal(&[0.3f64.exp(), (-1.7f64).exp()]),
            1e-14
        ));
    }

    #[test]
    fn exp_matches_taylor_series() {
        let mut rng = rng(8);
        for _ in 0..20 {
            let m = random_matrix(&mut rng, 4);
            let m = &m / c64(one_norm(&m), 0.0);
            let exact = taylor_exp(&m, 30);
            assert!(close(&matrix_exp(&m).unwrap(), &exact, 1e-10));
        }
    }

    #[test]
    fn exp_large_norm_relative_accuracy() {
        // Diagonalizable with known spectrum: U diag(d) U^*.
        let mut rng = rng(9);
        let h = random_hermitian(&mut rng, 4);
        let u = matrix_exp(&(h.as_matrix() * c64(0.0, 1.0))).unwrap();
        let d = [-60.0, -10.0, 5.0, 40.0];
        let m = &u * real_diagonal(&d) * u.adjoint();
        let exact = &u * real_diagonal(&d.map(f64::exp)) * u.adjoint();
        let got = matrix_exp(&m).unwrap();
        assert!(max_abs(&(got - &exact)) <= 1e-9 * max_abs(&exact));
    }

    #[test]
    fn exp_semigroup_property() {
        let mut rng = rng(10);
        for _ in 0..20 {
            let m = random_matrix(&mut rng, 4);
            let m = &m * c64(2.0 / one_norm(&m), 0.0);
            let (s, t) = (0.7, 1.9);
            let full = matrix_exp(&(&m * c64(s + t, 0.0))).unwrap();
            let split =
                matrix_exp(&(&m * c64(s, 0.0))).unwrap() * matrix_exp(&(&m * c64(t, 0.0))).unwrap();
            assert!((&full - split).norm() <= 1e-8 * full.norm());
        }
    }

    #[test]
    fn exp_reports_overflow() {
        let m = real_diagonal(&[1e300, 0.0]);
        assert_eq!(matrix_exp(&m), Err(Error::Overflow));
    }
}
