//! Dense real matrix kernel.
//!
//! Row-major [`Matrix`] and exactly-symmetric [`SymMatrix`], LU solves,
//! Jacobi eigen/SVD routines, the Moore–Penrose pseudo-inverse, the
//! column-stacking vectorization of the stochastic Lyapunov operator and
//! the semidefiniteness tests built on top of them.

mod dense;
pub mod eigen;
pub mod lu;
pub mod svd;
mod sym;

pub use dense::Matrix;
pub use eigen::{eigenvalues, spectral_abscissa, sym_eigen, Eigenvalue, SymEigen};
pub use lu::{solve, Lu};
pub use svd::{pseudo_inverse, rank, svd, Svd};
pub use sym::{SymMatrix, SYMMETRY_DEFECT_TOL};

use crate::scalar::Real;

/// Default relative singular-value cutoff for pseudo-inverses.
pub const PINV_TOL: f64 = 1e-9;

/// Matrix `K` with `K·vec(X) = vec(XA + AᵀX + CᵀXC)` for column-stacked
/// `vec`, i.e. `K = Aᵀ⊗I + I⊗Aᵀ + Cᵀ⊗Cᵀ`.
pub fn vec_lyapunov_matrix<T: Real>(a: &Matrix<T>, c: &Matrix<T>) -> Matrix<T> {
    assert!(a.is_square() && c.shape() == a.shape(), "A and C must be square of equal size");
    let n = a.rows();
    let i = Matrix::identity(n);
    let at = a.transpose();
    let ct = c.transpose();
    &(&at.kron(&i) + &i.kron(&at)) + &ct.kron(&ct)
}

/// `λ_min(X) ≥ −tol`.
pub fn is_psd<T: Real>(x: &SymMatrix<T>, tol: T) -> bool {
    x.dim() == 0 || x.min_eigenvalue() >= -tol
}

/// `λ_min(X) > tol`.
pub fn is_pd<T: Real>(x: &SymMatrix<T>, tol: T) -> bool {
    x.dim() == 0 || x.min_eigenvalue() > tol
}

/// `λ_max(X) ≤ tol`.
pub fn is_nsd<T: Real>(x: &SymMatrix<T>, tol: T) -> bool {
    x.dim() == 0 || x.max_eigenvalue() <= tol
}

/// Assembles `[[M, L], [Lᵀ, N]]`.
pub fn block_sym<T: Real>(m: &SymMatrix<T>, l: &Matrix<T>, n: &SymMatrix<T>) -> SymMatrix<T> {
    assert_eq!(l.shape(), (m.dim(), n.dim()), "L must be dim(M) x dim(N)");
    let top = m.as_matrix().hstack(l);
    let bottom = l.transpose().hstack(n.as_matrix());
    SymMatrix::symmetrize(top.vstack(&bottom))
}

/// Positive semidefiniteness of the block matrix `[[M, L], [Lᵀ, N]]`.
pub fn extended_schur_holds<T: Real>(
    m: &SymMatrix<T>,
    l: &Matrix<T>,
    n: &SymMatrix<T>,
    tol: T,
) -> bool {
    is_psd(&block_sym(m, l, n), tol)
}

/// The three-part form of the extended Schur condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchurConditions {
    /// `M − L N† Lᵀ ⪰ 0`
    pub complement_psd: bool,
    /// `N ⪰ 0`
    pub n_psd: bool,
    /// `L (I − N N†) = 0`
    pub range_ok: bool,
}

impl SchurConditions {
    pub fn all(&self) -> bool {
        self.complement_psd && self.n_psd && self.range_ok
    }
}

/// Evaluates the complement / sign / range conditions separately. The
/// range test is scaled by `1 + ‖L‖_max`.
pub fn schur_conditions<T: Real>(
    m: &SymMatrix<T>,
    l: &Matrix<T>,
    n: &SymMatrix<T>,
    tol: T,
) -> SchurConditions {
    let n_pinv = n.pseudo_inverse(T::lit(PINV_TOL));
    let complement = m.sub(&n_pinv.congruence(&l.transpose()));
    let proj = &Matrix::identity(n.dim()) - &(n.as_matrix() * n_pinv.as_matrix());
    let leak = (l * &proj).max_abs();
    SchurConditions {
        complement_psd: is_psd(&complement, tol),
        n_psd: is_psd(n, tol),
        range_ok: leak <= tol * (T::one() + l.max_abs()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vec_lyapunov_scalar_and_zero() {
        let k = vec_lyapunov_matrix(&Matrix::scalar(-2.0), &Matrix::scalar(1.0));
        assert_eq!(k, Matrix::scalar(-3.0));
        let z = Matrix::<f64>::zeros(2, 2);
        assert_eq!(vec_lyapunov_matrix(&z, &z), Matrix::zeros(4, 4));
    }

    #[test]
    fn vec_lyapunov_matches_direct_evaluation() {
        let a = Matrix::from_rows(&[[0.3_f64, -1.2], [0.8, -0.5]]);
        let c = Matrix::from_rows(&[[-0.4, 0.9], [1.1, 0.2]]);
        let x = Matrix::from_rows(&[[1.5, -0.7], [0.25, 2.0]]);
        let k = vec_lyapunov_matrix(&a, &c);
        let direct = &(&(&x * &a) + &(&a.transpose() * &x)) + &(&(&c.transpose() * &x) * &c);
        let got = k.mul_vec(&x.vec());
        for (g, d) in got.iter().zip(direct.vec()) {
            assert!((g - d).abs() < 1e-12);
        }
    }

    #[test]
    fn definiteness_examples() {
        assert!(is_pd(&SymMatrix::<f64>::identity(3), 0.0));
        assert!(is_pd(&SymMatrix::from_rows(&[[2.0, -1.0], [-1.0, 2.0]]).unwrap(), 0.0));
        assert!(!is_psd(&SymMatrix::diag(&[-1.5, 0.5]), 1e-12));
    }

    #[test]
    fn extended_schur_examples() {
        let s = |x: f64| SymMatrix::scalar(x);
        let m = |x: f64| Matrix::scalar(x);
        assert!(extended_schur_holds(&s(2.0), &m(1.0), &s(0.5), 1e-12));
        assert!(extended_schur_holds(&s(0.0), &m(0.0), &s(0.0), 1e-12));
        assert!(!extended_schur_holds(&s(1.0), &m(1.0), &s(0.0), 1e-12));
        let c = schur_conditions(&s(1.0), &m(1.0), &s(0.0), 1e-12);
        assert!(!c.range_ok && c.n_psd && c.complement_psd);
        assert!(schur_conditions(&s(2.0), &m(1.0), &s(0.5), 1e-10).all());
    }
}
