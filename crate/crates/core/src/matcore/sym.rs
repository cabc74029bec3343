use std::ops::Deref;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::eigen::{sym_eigen, SymEigen};
use super::Matrix;

/// Asymmetry tolerated by [`SymMatrix::new`] before it refuses the input.
pub const SYMMETRY_DEFECT_TOL: f64 = 1e-8;

/// Square symmetric matrix. Construction symmetrizes via `(X + Xᵀ)/2`, so
/// the stored entries are exactly symmetric; the pre-symmetrization
/// defect `max|X − Xᵀ|` is kept for diagnostics.
#[derive(Clone, PartialEq)]
pub struct SymMatrix<T> {
    inner: Matrix<T>,
    defect: T,
}

impl<T: Real> SymMatrix<T> {
    /// Symmetrizes `m`, failing if it is not square, not finite, or its
    /// asymmetry exceeds [`SYMMETRY_DEFECT_TOL`].
    pub fn new(m: Matrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "symmetric matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("symmetric matrix"));
        }
        let s = Self::symmetrize(m);
        if s.defect > T::lit(SYMMETRY_DEFECT_TOL) {
            return Err(Error::Asymmetric {
                defect: s.defect.as_f64(),
            });
        }
        Ok(s)
    }

    /// Symmetrizes without checking the defect. Used on results that are
    /// symmetric in exact arithmetic (`XᵀPX`, Riccati residuals, ...).
    pub fn symmetrize(m: Matrix<T>) -> Self {
        assert!(m.is_square(), "symmetrize needs a square matrix");
        let defect = m.asymmetry();
        let n = m.rows();
        let half = T::lit(0.5);
        let inner = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                m[(i, i)]
            } else {
                half * (m[(i, j)] + m[(j, i)])
            }
        });
        Self { inner, defect }
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows))
    }

    pub fn zeros(n: usize) -> Self {
        Self::symmetrize(Matrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self::symmetrize(Matrix::identity(n))
    }

    pub fn scalar(x: T) -> Self {
        Self::symmetrize(Matrix::scalar(x))
    }

    pub fn diag(d: &[T]) -> Self {
        Self::symmetrize(Matrix::diag(d))
    }

    pub fn dim(&self) -> usize {
        self.inner.rows()
    }

    /// Asymmetry of the matrix this value was built from.
    pub fn defect(&self) -> T {
        self.defect
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.inner
    }

    pub fn eigen(&self) -> SymEigen<T> {
        sym_eigen(&self.inner)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<T> {
        self.eigen().values
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues().first().copied().unwrap_or(T::zero())
    }

    pub fn max_eigenvalue(&self) -> T {
        self.eigenvalues().last().copied().unwrap_or(T::zero())
    }

    /// Pseudo-inverse through the eigendecomposition; exactly symmetric
    /// and commuting with `self` up to rounding. Eigenvalues with
    /// `|λ| ≤ tol · max|λ|` are dropped.
    pub fn pseudo_inverse(&self, tol: T) -> SymMatrix<T> {
        self.pseudo_inverse_floor(tol, T::zero())
    }

    /// As [`Self::pseudo_inverse`], additionally dropping eigenvalues with
    /// `|λ| ≤ floor`. A relative cutoff alone never zeroes a `1×1` matrix.
    pub fn pseudo_inverse_floor(&self, tol: T, floor: T) -> SymMatrix<T> {
        let n = self.dim();
        let e = self.eigen();
        let lmax = e.values.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let mut out = Matrix::zeros(n, n);
        if lmax == T::zero() {
            return Self::symmetrize(out);
        }
        let cutoff = (tol * lmax).max(floor);
        for (k, &lam) in e.values.iter().enumerate() {
            if lam.abs() <= cutoff {
                continue;
            }
            let inv = T::one() / lam;
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += e.vectors[(i, k)] * inv * e.vectors[(j, k)];
                }
            }
        }
        Self::symmetrize(out)
    }

    /// Numerical rank with the pseudo-inverse cutoff.
    pub fn rank(&self, tol: T) -> usize {
        let vals = self.eigenvalues();
        let lmax = vals.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        if lmax == T::zero() {
            return 0;
        }
        vals.iter().filter(|x| x.abs() > tol * lmax).count()
    }

    /// `Xᵀ · self · X`.
    pub fn congruence(&self, x: &Matrix<T>) -> SymMatrix<T> {
        Self::symmetrize(&(&x.transpose() * &self.inner) * x)
    }

    pub fn add(&self, other: &SymMatrix<T>) -> SymMatrix<T> {
        Self::symmetrize(&self.inner + &other.inner)
    }

    pub fn sub(&self, other: &SymMatrix<T>) -> SymMatrix<T> {
        Self::symmetrize(&self.inner - &other.inner)
    }

    pub fn scale(&self, s: T) -> SymMatrix<T> {
        Self::symmetrize(self.inner.scale(s))
    }

    /// Quadratic form `⟨self·x, x⟩`.
    pub fn quad(&self, x: &[T]) -> T {
        self.inner.mul_vec(x).iter().zip(x).map(|(&a, &b)| a * b).sum()
    }

    pub fn cast<U: Real>(&self) -> SymMatrix<U> {
        SymMatrix::symmetrize(self.inner.cast())
    }
}

impl<T> Deref for SymMatrix<T> {
    type Target = Matrix<T>;
    fn deref(&self) -> &Matrix<T> {
        &self.inner
    }
}

impl<T: std::fmt::Debug> std::fmt::Debug for SymMatrix<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Sym{:?}", self.inner)
    }
}
