//! Dense symmetric eigendecomposition, rank-k truncation and the
//! eigenvalue-thresholded scaling matrix.
//!
//! The truncated decomposition is obtained from a full dense symmetric
//! eigendecomposition followed by truncation. This costs O(p^3) rather than
//! the O(kp^2) of a dedicated partial solver, which is acceptable for the
//! p ≲ 1000 regime this crate targets.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Relative floor below which λ_{r+1} is treated as zero.
pub const EIGEN_TOL: f64 = 1e-10;

/// A dense symmetric matrix. Entries are stored exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates symmetry (up to `SYMMETRY_TOL * ||A||_2`) and symmetrizes
    /// the stored entries exactly.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let sym = (&m + m.transpose()) * 0.5;
        let skew = (&m - m.transpose()).amax() * 0.5;
        let scale = spectral_norm_dense(&sym).max((&m - &sym).norm());
        if skew > SYMMETRY_TOL * scale {
            return Err(Error::InvalidInput(format!(
                "matrix is not symmetric: max skew {skew:e} vs norm {scale:e}"
            )));
        }
        Ok(Self(sym))
    }

    /// Wraps a matrix the caller guarantees to be exactly symmetric.
    pub(crate) fn from_row_major_unchecked(p: usize, data: Vec<f64>) -> Self {
        // Symmetric, so row-major and column-major layouts coincide.
        Self(DMatrix::from_vec(p, p, data))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn identity(p: usize) -> Self {
        Self(DMatrix::identity(p, p))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Entry-wise difference; the result is symmetric.
    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Self(&self.0 - &other.0))
    }
}

/// Full eigendecomposition with eigenvalues in non-increasing order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    pub fn smallest(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn truncate(&self, k: usize) -> Result<TruncatedEigen> {
        let p = self.values.len();
        if k == 0 || k > p {
            return Err(Error::InvalidRank { k, p });
        }
        Ok(TruncatedEigen {
            values: self.values.rows(0, k).into_owned(),
            vectors: self.vectors.columns(0, k).into_owned(),
        })
    }
}

/// Eigendecomposition sorted in non-increasing order; each eigenvector's
/// first non-negligible coordinate is positive.
pub fn sym_eigen(h: &SymMatrix) -> SymEigen {
    let p = h.dim();
    let eig = SymmetricEigen::new(h.0.clone());
    let mut order: Vec<usize> = (0..p).collect();
    // Stable sort keeps decomposition order among ties.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let cutoff = 1e-12 * col.amax();
        if let Some(first) = col.iter().find(|x| x.abs() > cutoff) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }
    SymEigen { values, vectors }
}

/// Leading k eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct TruncatedEigen {
    /// Non-increasing.
    pub values: DVector<f64>,
    /// p×k, orthonormal columns.
    pub vectors: DMatrix<f64>,
}

impl TruncatedEigen {
    pub fn rank(&self) -> usize {
        self.values.len()
    }

    /// U Λ U^T.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = &self.vectors * DMatrix::from_diagonal(&self.values);
        scaled * self.vectors.transpose()
    }
}

/// The k algebraically largest eigenpairs of `h`.
pub fn truncated_eigen(h: &SymMatrix, k: usize) -> Result<TruncatedEigen> {
    let p = h.dim();
    if k == 0 || k > p {
        return Err(Error::InvalidRank { k, p });
    }
    sym_eigen(h).truncate(k)
}

/// Largest absolute eigenvalue.
pub fn spectral_norm(a: &SymMatrix) -> f64 {
    spectral_norm_dense(&a.0)
}

fn spectral_norm_dense(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Q = λ_{r+1}^{-1} I + U_r (Λ_r^{-1} − λ_{r+1}^{-1} I) U_r^T, kept in factored
/// form so that applying it costs O(pr).
#[derive(Debug, Clone)]
pub struct ScalingMatrix {
    p: usize,
    lambda_r1: f64,
    /// p×r
    basis: DMatrix<f64>,
    /// λ_1 ≥ … ≥ λ_r
    leading: DVector<f64>,
}

impl ScalingMatrix {
    /// Builds Q from an existing full decomposition of the sub-sampled Hessian.
    pub fn from_eigen(eig: &SymEigen, r: usize) -> Result<Self> {
        let p = eig.values.len();
        if r == 0 || r + 1 > p {
            return Err(Error::InvalidRank { k: r + 1, p });
        }
        let lambda_r1 = eig.values[r];
        let tol = EIGEN_TOL * eig.largest().max(1.0);
        if !(lambda_r1 > tol) {
            return Err(Error::DegenerateSpectrum {
                lambda: lambda_r1,
                tol,
            });
        }
        Ok(Self {
            p,
            lambda_r1,
            basis: eig.vectors.columns(0, r).into_owned(),
            leading: eig.values.rows(0, r).into_owned(),
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn rank(&self) -> usize {
        self.leading.len()
    }

    pub fn lambda_r1(&self) -> f64 {
        self.lambda_r1
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn leading(&self) -> &DVector<f64> {
        &self.leading
    }

    /// ‖Q‖₂ = 1/λ_{r+1}.
    pub fn norm(&self) -> f64 {
        1.0 / self.lambda_r1
    }

    /// Q·v without materializing Q.
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.p {
            return Err(Error::InvalidInput(format!(
                "vector of length {} applied to scaling matrix of dimension {}",
                v.len(),
                self.p
            )));
        }
        let inv_r1 = 1.0 / self.lambda_r1;
        let mut coeffs = self.basis.tr_mul(v);
        for (c, &lam) in coeffs.iter_mut().zip(self.leading.iter()) {
            *c *= 1.0 / lam - inv_r1;
        }
        let mut out = v * inv_r1;
        out.gemv(1.0, &self.basis, &coeffs, 1.0);
        Ok(out)
    }

    /// Dense p×p materialization; for testing and diagnostics.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let inv_r1 = 1.0 / self.lambda_r1;
        let diag = self.leading.map(|lam| 1.0 / lam - inv_r1);
        let mut q = &self.basis * DMatrix::from_diagonal(&diag) * self.basis.transpose();
        for i in 0..self.p {
            q[(i, i)] += inv_r1;
        }
        q
    }
}

/// Eigenvalue-thresholded inverse of `h_s` using its rank-(r+1) truncation.
pub fn build_scaling_matrix(h_s: &SymMatrix, r: usize) -> Result<ScalingMatrix> {
    let p = h_s.dim();
    if r == 0 || r + 1 > p {
        return Err(Error::InvalidRank { k: r + 1, p });
    }
    ScalingMatrix::from_eigen(&sym_eigen(h_s), r)
}
