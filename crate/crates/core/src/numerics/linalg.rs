use nalgebra::SymmetricEigen;

use super::{Matrix, Vector};
use crate::error::{invalid, shape, Error, Result};

/// Relative asymmetry tolerated by [`SymMatrix::new`].
const SYMMETRY_TOL: f64 = 1e-12;

/// A dense real symmetric matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Validates squareness, finiteness and symmetry
    /// (`|e_ij - e_ji| <= 1e-12 * max|e|`).
    pub fn new(m: Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(shape(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix has non-finite entries"));
        }
        let scale = m.amax();
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self(m))
    }

    /// Averages `m` with its transpose. Used for products such as `A S A^T`
    /// that are symmetric in exact arithmetic.
    pub fn symmetrize(m: Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(shape(format!(
                "cannot symmetrize a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix has non-finite entries"));
        }
        let t = m.transpose();
        Ok(Self((m + t) * 0.5))
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Matrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diagonal(&Vector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Eigenvalues (unsorted) and the matching orthonormal eigenvectors.
    pub fn eigen(&self) -> (Vector, Matrix) {
        let e = SymmetricEigen::new(self.0.clone());
        (e.eigenvalues, e.eigenvectors)
    }

    pub fn eigenvalues(&self) -> Vector {
        self.0.clone().symmetric_eigenvalues()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.eigenvalues().max()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.eigenvalues().min()
    }

    /// `Q f(L) Q^T` for the eigendecomposition `Q L Q^T` of `self`.
    fn spectral_map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let (vals, vecs) = self.eigen();
        let mapped = Vector::from_iterator(vals.len(), vals.iter().map(|&v| f(v)));
        let scaled = &vecs * Matrix::from_diagonal(&mapped);
        let out = scaled * vecs.transpose();
        // round-off leaves the product slightly asymmetric
        let t = out.transpose();
        SymMatrix((out + t) * 0.5)
    }
}

impl std::ops::Deref for SymMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// Default eigenvalue floor for [`inv_sqrt_sym`]: `1e-10` times the largest
/// eigenvalue.
pub fn default_eigen_floor(m: &SymMatrix) -> f64 {
    1e-10 * m.max_eigenvalue().max(f64::MIN_POSITIVE)
}

/// Symmetric inverse square root `Q L^{-1/2} Q^T`.
///
/// Fails with [`Error::NotPositiveDefinite`] carrying the smallest eigenvalue
/// when any eigenvalue is below `floor`.
pub fn inv_sqrt_sym(m: &SymMatrix, floor: f64) -> Result<SymMatrix> {
    if !(floor > 0.0) || !floor.is_finite() {
        return Err(invalid(format!("eigenvalue floor must be positive, got {floor}")));
    }
    if m.dim() == 0 {
        return Ok(SymMatrix::zeros(0));
    }
    let (vals, vecs) = m.eigen();
    let min = vals.min();
    if min < floor {
        return Err(Error::NotPositiveDefinite {
            eigenvalue: min,
            floor,
        });
    }
    let mapped = Vector::from_iterator(vals.len(), vals.iter().map(|&v| v.sqrt().recip()));
    let out = (&vecs * Matrix::from_diagonal(&mapped)) * vecs.transpose();
    let t = out.transpose();
    Ok(SymMatrix((out + t) * 0.5))
}

/// [`inv_sqrt_sym`] with [`default_eigen_floor`].
pub fn inv_sqrt_sym_default(m: &SymMatrix) -> Result<SymMatrix> {
    inv_sqrt_sym(m, default_eigen_floor(m))
}

/// Symmetric square root of a positive semidefinite matrix; negative
/// eigenvalues from round-off are clamped to zero.
pub fn sqrt_psd(m: &SymMatrix) -> SymMatrix {
    m.spectral_map(|v| v.max(0.0).sqrt())
}

/// Largest singular value, from the largest eigenvalue of the smaller Gram
/// matrix.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    let lambda = SymMatrix::symmetrize(gram)?.max_eigenvalue();
    Ok(lambda.max(0.0).sqrt())
}

/// `max_ij |a_ij - b_ij|`.
pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
