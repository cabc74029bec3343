use crate::scalar::Real;

use super::Matrix;

/// Thin singular value decomposition `A = U diag(σ) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Matrix<T>,
    pub singular_values: Vec<T>,
    pub v: Matrix<T>,
}

/// One-sided (Hestenes) Jacobi SVD. Singular values are returned in the
/// column order produced by the sweeps, not sorted.
pub fn svd<T: Real>(a: &Matrix<T>) -> Svd<T> {
    if a.rows() < a.cols() {
        let t = svd(&a.transpose());
        return Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    let (m, n) = a.shape();
    let mut u = a.clone();
    let mut v = Matrix::identity(n);
    let eps = T::epsilon();

    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..m {
                    let (up, uq) = (u[(i, p)], u[(i, q)]);
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = if zeta == T::zero() {
                    T::one()
                } else {
                    zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (up, uq) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv = vec![T::zero(); n];
    for j in 0..n {
        let norm = (0..m).map(|i| u[(i, j)] * u[(i, j)]).sum::<T>().sqrt();
        sv[j] = norm;
        if norm > T::zero() {
            for i in 0..m {
                u[(i, j)] /= norm;
            }
        }
    }
    Svd {
        u,
        singular_values: sv,
        v,
    }
}

/// Moore–Penrose pseudo-inverse. Singular values at or below
/// `tol · σ_max` are treated as zero; an all-zero input gives the zero
/// matrix of transposed shape.
pub fn pseudo_inverse<T: Real>(a: &Matrix<T>, tol: T) -> Matrix<T> {
    let (m, n) = a.shape();
    if a.max_abs() == T::zero() {
        return Matrix::zeros(n, m);
    }
    let d = svd(a);
    let smax = d.singular_values.iter().fold(T::zero(), |x, &s| x.max(s));
    let cutoff = tol * smax;
    let k = d.singular_values.len();
    let mut out = Matrix::zeros(n, m);
    for r in 0..k {
        let s = d.singular_values[r];
        if s <= cutoff {
            continue;
        }
        let inv = T::one() / s;
        for i in 0..n {
            let vi = d.v[(i, r)] * inv;
            if vi == T::zero() {
                continue;
            }
            for j in 0..m {
                out[(i, j)] += vi * d.u[(j, r)];
            }
        }
    }
    out
}

/// Numerical rank with the same relative cutoff as [`pseudo_inverse`].
pub fn rank<T: Real>(a: &Matrix<T>, tol: T) -> usize {
    if a.max_abs() == T::zero() {
        return 0;
    }
    let d = svd(a);
    let smax = d.singular_values.iter().fold(T::zero(), |x, &s| x.max(s));
    d.singular_values.iter().filter(|&&s| s > tol * smax).count()
}
