//! Dense univariate polynomials with real-root extraction through
//! companion-matrix eigenvalues.

use crate::matcore::{eigenvalues, Matrix};
use crate::scalar::Real;

/// `Σ cᵢ xⁱ`, coefficients in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<T> {
    coeffs: Vec<T>,
}

impl<T: Real> Poly<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last() == Some(&T::zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    /// `a + b x`.
    pub fn linear(a: T, b: T) -> Self {
        Self::new(vec![a, b])
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Self, i: usize| p.coeffs.get(i).copied().unwrap_or(T::zero());
        Self::new((0..len).map(|i| get(self, i) + get(other, i)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![T::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * T::lit(i as f64))
                .collect(),
        )
    }

    pub fn max_abs_coeff(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |m, c| m.max(c.abs()))
    }

    /// Drops leading coefficients with `|c| ≤ rel · max|c|`.
    pub fn trimmed(&self, rel: T) -> Self {
        let cutoff = rel * self.max_abs_coeff();
        let mut coeffs = self.coeffs.clone();
        while coeffs.last().is_some_and(|c| c.abs() <= cutoff) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    /// Real roots (with multiplicity collapsed) from the companion matrix.
    /// Eigenvalues whose imaginary part is below `imag_tol · (1 + |re|)`
    /// count as real, so that perturbed multiple roots are not lost. Each
    /// candidate is polished by a few guarded Newton steps.
    pub fn real_roots(&self, imag_tol: T) -> Vec<T> {
        let p = self.trimmed(T::lit(1e-14));
        let Some(deg) = p.degree() else {
            return Vec::new();
        };
        if deg == 0 {
            return Vec::new();
        }
        let lead = p.coeffs[deg];
        let comp = Matrix::from_fn(deg, deg, |i, j| {
            if i == 0 {
                -p.coeffs[deg - 1 - j] / lead
            } else if i == j + 1 {
                T::one()
            } else {
                T::zero()
            }
        });
        let Ok(eigs) = eigenvalues(&comp) else {
            return Vec::new();
        };
        let dp = p.derivative();
        let mut roots: Vec<T> = eigs
            .into_iter()
            .filter(|e| e.im.abs() <= imag_tol * (T::one() + e.re.abs()))
            .map(|e| p.polish(&dp, e.re))
            .collect();
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        roots.dedup_by(|a, b| (*a - *b).abs() <= T::lit(1e-12) * (T::one() + b.abs()));
        roots
    }

    fn polish(&self, dp: &Self, mut x: T) -> T {
        let mut fx = self.eval(x).abs();
        for _ in 0..8 {
            let d = dp.eval(x);
            if d == T::zero() {
                break;
            }
            let next = x - self.eval(x) / d;
            let fnext = self.eval(next).abs();
            if !(fnext < fx) {
                break;
            }
            x = next;
            fx = fnext;
        }
        x
    }
}

/// Square matrix with polynomial entries.
#[derive(Debug, Clone)]
pub struct PolyMatrix<T> {
    n: usize,
    entries: Vec<Poly<T>>,
}

impl<T: Real> PolyMatrix<T> {
    /// `A + x·B`.
    pub fn affine(a: &Matrix<T>, b: &Matrix<T>) -> Self {
        assert!(a.is_square() && a.shape() == b.shape());
        let n = a.rows();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(Poly::linear(a[(i, j)], b[(i, j)]));
            }
        }
        Self { n, entries }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly<T> {
        &self.entries[i * self.n + j]
    }

    fn minor(&self, skip_r: usize, skip_c: usize) -> Self {
        let n = self.n - 1;
        let mut entries = Vec::with_capacity(n * n);
        for i in (0..self.n).filter(|&i| i != skip_r) {
            for j in (0..self.n).filter(|&j| j != skip_c) {
                entries.push(self.get(i, j).clone());
            }
        }
        Self { n, entries }
    }

    /// Determinant by cofactor expansion along the first row. Intended for
    /// the small control dimensions that occur here.
    pub fn det(&self) -> Poly<T> {
        match self.n {
            0 => Poly::constant(T::one()),
            1 => self.get(0, 0).clone(),
            _ => {
                let mut acc = Poly::zero();
                for j in 0..self.n {
                    let term = self.get(0, j).mul(&self.minor(0, j).det());
                    acc = if j % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
                }
                acc
            }
        }
    }

    /// Adjugate, `adj(X)·X = det(X)·I`.
    pub fn adjugate(&self) -> Self {
        let n = self.n;
        if n == 1 {
            return Self {
                n,
                entries: vec![Poly::constant(T::one())],
            };
        }
        let mut entries = vec![Poly::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let cof = self.minor(i, j).det();
                entries[j * n + i] = if (i + j) % 2 == 0 { cof } else { cof.scale(-T::one()) };
            }
        }
        Self { n, entries }
    }

    /// `uᵀ X v` for polynomial `u`, `v`.
    pub fn bilinear(&self, u: &[Poly<T>], v: &[Poly<T>]) -> Poly<T> {
        let mut acc = Poly::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                acc = acc.add(&u[i].mul(self.get(i, j)).mul(&v[j]));
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_eval() {
        let p = Poly::linear(-1.0, 1.0).mul(&Poly::linear(-2.0, 1.0));
        assert_eq!(p.coeffs(), &[2.0, -3.0, 1.0]);
        assert_eq!(p.eval(3.0), 2.0);
        assert_eq!(p.derivative().coeffs(), &[-3.0, 2.0]);
        assert!(p.sub(&p).is_zero());
    }

    #[test]
    fn roots_simple_and_double() {
        let p = Poly::new(vec![2.0_f64, -3.0, 1.0]);
        let r = p.real_roots(1e-6);
        assert_eq!(r.len(), 2);
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[1] - 2.0).abs() < 1e-14);
        let dbl = Poly::new(vec![-1.0_f64, 2.0, -1.0]);
        let r = dbl.real_roots(1e-6);
        assert!(!r.is_empty() && r.iter().all(|x: &f64| (x - 1.0).abs() < 1e-7));
        assert!(Poly::new(vec![1.0, 0.0, 1.0]).real_roots(1e-6).is_empty());
    }

    #[test]
    fn det_and_adjugate() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let b = Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]);
        let pm = PolyMatrix::affine(&a, &b);
        // (1+x)(4+2x) − 6
        assert_eq!(pm.det().coeffs(), &[-2.0, 6.0, 2.0]);
        let adj = pm.adjugate();
        for x in [-1.5, 0.0, 2.0] {
            let m = &a + &b.scale(x);
            let adj_x = Matrix::from_fn(2, 2, |i, j| adj.get(i, j).eval(x));
            let prod = &adj_x * &m;
            let d = pm.det().eval(x);
            assert!(prod.approx_eq(&Matrix::identity(2).scale(d), 1e-12));
        }
    }
}
