//! Vector-valued exponential polynomials `f(t) = Σ tᵏ e^{−αt} v`.
//!
//! Every deterministic forcing term in the crate (drift/diffusion offsets,
//! linear cost weights, BSDE drivers, the feedforward control) lives in
//! this class. It is closed under linear maps, addition and the backward
//! integral `∫ₜ^∞ e^{G(s−t)} f(s) ds` for Hurwitz `G`, and inner products
//! of two members integrate over `[0, ∞)` in closed form.

use crate::error::{Error, Result};
use crate::matcore::{solve, Matrix};
use crate::scalar::Real;

/// One term `tᵏ e^{−αt} v` with `α > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpTerm<T> {
    pub coeff: Vec<T>,
    pub power: u32,
    pub rate: T,
}

impl<T: Real> ExpTerm<T> {
    pub fn new(coeff: Vec<T>, power: u32, rate: T) -> Result<Self> {
        if !(rate > T::zero()) || !rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "forcing decay rate must be positive, got {rate}"
            )));
        }
        if coeff.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("forcing coefficient"));
        }
        Ok(Self { coeff, power, rate })
    }

    #[inline]
    fn weight(&self, t: T) -> T {
        t.powi(self.power as i32) * (-self.rate * t).exp()
    }
}

/// Sum of [`ExpTerm`]s of a fixed dimension. The empty sum is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPoly<T> {
    dim: usize,
    terms: Vec<ExpTerm<T>>,
}

impl<T: Real> ExpPoly<T> {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    pub fn new(dim: usize, terms: Vec<ExpTerm<T>>) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| t.coeff.len() != dim) {
            return Err(Error::Dimension(format!(
                "forcing term has {} components, expected {dim}",
                t.coeff.len()
            )));
        }
        Ok(Self { dim, terms }.simplified())
    }

    /// `e^{−αt} v`.
    pub fn exponential(coeff: Vec<T>, rate: T) -> Result<Self> {
        let dim = coeff.len();
        Self::new(dim, vec![ExpTerm::new(coeff, 0, rate)?])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[ExpTerm<T>] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Slowest decay rate among the terms.
    pub fn min_rate(&self) -> Option<T> {
        self.terms.iter().map(|t| t.rate).reduce(T::min)
    }

    pub fn eval(&self, t: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: T, out: &mut [T]) {
        out.iter_mut().for_each(|x| *x = T::zero());
        for term in &self.terms {
            let w = term.weight(t);
            for (o, &c) in out.iter_mut().zip(&term.coeff) {
                *o += w * c;
            }
        }
    }

    /// Merges terms sharing `(power, rate)` and drops exact zeros.
    fn simplified(mut self) -> Self {
        let mut merged: Vec<ExpTerm<T>> = Vec::with_capacity(self.terms.len());
        for term in self.terms.drain(..) {
            match merged
                .iter_mut()
                .find(|m| m.power == term.power && m.rate == term.rate)
            {
                Some(m) => m.coeff.iter_mut().zip(&term.coeff).for_each(|(a, &b)| *a += b),
                None => merged.push(term),
            }
        }
        merged.retain(|t| t.coeff.iter().any(|&c| c != T::zero()));
        merged.sort_by(|a, b| {
            a.rate
                .partial_cmp(&b.rate)
                .unwrap()
                .then(a.power.cmp(&b.power))
        });
        Self { dim: self.dim, terms: merged }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "ExpPoly dimension mismatch");
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { dim: self.dim, terms }.simplified()
    }

    pub fn scale(&self, s: T) -> Self {
        self.apply(&Matrix::identity(self.dim).scale(s))
    }

    /// `t ↦ M f(t)`.
    pub fn apply(&self, m: &Matrix<T>) -> Self {
        assert_eq!(m.cols(), self.dim, "ExpPoly apply: matrix has wrong width");
        let terms = self
            .terms
            .iter()
            .map(|t| ExpTerm {
                coeff: m.mul_vec(&t.coeff),
                power: t.power,
                rate: t.rate,
            })
            .collect();
        Self { dim: m.rows(), terms }.simplified()
    }

    /// Time derivative.
    pub fn derivative(&self) -> Self {
        let mut terms = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            terms.push(ExpTerm {
                coeff: t.coeff.iter().map(|&c| -t.rate * c).collect(),
                power: t.power,
                rate: t.rate,
            });
            if t.power > 0 {
                let k = T::lit(t.power as f64);
                terms.push(ExpTerm {
                    coeff: t.coeff.iter().map(|&c| k * c).collect(),
                    power: t.power - 1,
                    rate: t.rate,
                });
            }
        }
        Self { dim: self.dim, terms }.simplified()
    }

    /// Stacks `self` on top of `other`.
    pub fn concat(&self, other: &Self) -> Self {
        let pad = |t: &ExpTerm<T>, before: usize, after: usize| ExpTerm {
            coeff: std::iter::repeat_n(T::zero(), before)
                .chain(t.coeff.iter().copied())
                .chain(std::iter::repeat_n(T::zero(), after))
                .collect(),
            power: t.power,
            rate: t.rate,
        };
        let terms = self
            .terms
            .iter()
            .map(|t| pad(t, 0, other.dim))
            .chain(other.terms.iter().map(|t| pad(t, self.dim, 0)))
            .collect();
        Self {
            dim: self.dim + other.dim,
            terms,
        }
        .simplified()
    }

    /// Components `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| ExpTerm {
                coeff: t.coeff[start..start + len].to_vec(),
                power: t.power,
                rate: t.rate,
            })
            .collect();
        Self { dim: len, terms }.simplified()
    }

    /// `∫₀^∞ ⟨f(t), g(t)⟩ dt`, exact.
    pub fn inner_integral(&self, other: &Self) -> T {
        assert_eq!(self.dim, other.dim, "ExpPoly dimension mismatch");
        let mut total = T::zero();
        for a in &self.terms {
            for b in &other.terms {
                let dot: T = a.coeff.iter().zip(&b.coeff).map(|(&x, &y)| x * y).sum();
                if dot == T::zero() {
                    continue;
                }
                total += dot * gamma_moment(a.power + b.power, a.rate + b.rate);
            }
        }
        total
    }

    /// `∫₀^∞ ⟨W f(t), g(t)⟩ dt`.
    pub fn weighted_inner_integral(&self, w: &Matrix<T>, other: &Self) -> T {
        self.apply(w).inner_integral(other)
    }

    /// The unique decaying solution of `Y' = −G·Y − f`, i.e.
    /// `Y(t) = ∫ₜ^∞ e^{G(s−t)} f(s) ds`, for Hurwitz `G`.
    ///
    /// For a term `tᵏ e^{−αt} v` the solution is `Σ_{j≤k} tʲ e^{−αt} w_j`
    /// with `(G − αI) w_k = −v` and `(G − αI) w_j = −(j+1) w_{j+1}`.
    pub fn backward_integral(&self, g: &Matrix<T>) -> Result<Self> {
        assert!(g.is_square() && g.rows() == self.dim, "G must be dim x dim");
        let n = self.dim;
        let mut terms = Vec::new();
        for term in &self.terms {
            let shifted = g - &Matrix::identity(n).scale(term.rate);
            let k = term.power as usize;
            let mut w = vec![vec![T::zero(); n]; k + 1];
            let rhs: Vec<T> = term.coeff.iter().map(|&c| -c).collect();
            w[k] = solve(&shifted, &rhs)?;
            for j in (0..k).rev() {
                let scale = -T::lit((j + 1) as f64);
                let rhs: Vec<T> = w[j + 1].iter().map(|&x| scale * x).collect();
                w[j] = solve(&shifted, &rhs)?;
            }
            for (j, coeff) in w.into_iter().enumerate() {
                terms.push(ExpTerm {
                    coeff,
                    power: j as u32,
                    rate: term.rate,
                });
            }
        }
        Ok(Self { dim: n, terms }.simplified())
    }

    pub fn cast<U: Real>(&self) -> ExpPoly<U> {
        ExpPoly {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm {
                    coeff: t.coeff.iter().map(|&c| U::lit(c.as_f64())).collect(),
                    power: t.power,
                    rate: U::lit(t.rate.as_f64()),
                })
                .collect(),
        }
    }
}

/// `∫₀^∞ tᵏ e^{−βt} dt = k! / β^{k+1}`.
fn gamma_moment<T: Real>(k: u32, beta: T) -> T {
    let mut fact = T::one();
    for i in 2..=k {
        fact *= T::lit(i as f64);
    }
    fact / beta.powi(k as i32 + 1)
}
