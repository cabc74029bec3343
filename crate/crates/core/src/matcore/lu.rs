use crate::error::{Error, Result};
use crate::scalar::Real;

use super::Matrix;

/// LU factorization with partial pivoting, `P·A = L·U`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    /// Factors a square matrix. A pivot below `rel_tol · max|A|` counts as
    /// a zero pivot and the matrix is reported singular.
    pub fn new(a: &Matrix<T>, rel_tol: T) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        let threshold = rel_tol * scale;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -T::one()), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= threshold || scale == T::zero() {
                return Err(Error::SingularOperator);
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.lu.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = T::zero());
            e[j] = T::one();
            for (i, v) in self.solve(&e).into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        inv
    }
}

/// Solves `A x = b` for square `A`.
pub fn solve<T: Real>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    Ok(Lu::new(a, T::lit(1e-13))?.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = Matrix::from_rows(&[[2.0_f64, 1.0], [5.0, 3.0]]);
        let x = solve(&a, &[4.0, 11.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        let inv = Lu::new(&a, 1e-13).unwrap().inverse();
        assert!((&a * &inv).approx_eq(&Matrix::identity(2), 1e-14));
    }

    #[test]
    fn detects_singular() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert_eq!(solve(&a, &[1.0, 1.0]), Err(Error::SingularOperator));
        assert_eq!(solve(&Matrix::<f64>::zeros(1, 1), &[0.0]), Err(Error::SingularOperator));
    }
}
