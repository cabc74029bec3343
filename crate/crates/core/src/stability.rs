//! Mean-square (L²) stability of linear SDEs driven by a scalar Brownian
//! motion,
//!
//! ```text
//! dX = A X dt + C X dW,
//! ```
//!
//! and stabilizability of the controlled pair `dX = (AX + Bu)dt + (CX + Du)dW`
//! by static feedback `u = ΘX`.
//!
//! Stability is decided by two independent routes which must agree: the
//! stochastic Lyapunov equation `PA + AᵀP + CᵀPC + I = 0` has a positive
//! definite solution, and the vectorized generator `Aᵀ⊗I + I⊗Aᵀ + Cᵀ⊗Cᵀ`
//! of the second moment has negative spectral abscissa.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matcore::{is_pd, spectral_abscissa, vec_lyapunov_matrix, Lu, Matrix, SymMatrix};
use crate::scalar::Real;
use crate::search::{nelder_mead, NelderMeadOptions};

/// Abscissa values inside `±BOUNDARY_BAND` count as the stability boundary.
pub const BOUNDARY_BAND: f64 = 1e-8;

/// A stabilizer search succeeds once the closed-loop abscissa is below this.
pub const STABILIZER_MARGIN: f64 = -1e-6;

/// The uncontrolled system `[A, C]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncontrolledSystem<T> {
    pub a: Matrix<T>,
    pub c: Matrix<T>,
}

impl<T: Real> UncontrolledSystem<T> {
    pub fn new(a: Matrix<T>, c: Matrix<T>) -> Result<Self> {
        if !a.is_square() || a.shape() != c.shape() {
            return Err(Error::Dimension(format!(
                "[A, C] needs square matrices of equal size, got {:?} and {:?}",
                a.shape(),
                c.shape()
            )));
        }
        Ok(Self { a, c })
    }

    pub fn scalar(a: T, c: T) -> Self {
        Self {
            a: Matrix::scalar(a),
            c: Matrix::scalar(c),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    /// `Aᵀ⊗I + I⊗Aᵀ + Cᵀ⊗Cᵀ`.
    pub fn generator(&self) -> Matrix<T> {
        vec_lyapunov_matrix(&self.a, &self.c)
    }

    /// Spectral abscissa of [`Self::generator`]; `+∞` if the eigenvalue
    /// iteration fails.
    pub fn abscissa(&self) -> T {
        spectral_abscissa(&self.generator()).unwrap_or(T::infinity())
    }
}

/// The controlled system `[A, C; B, D]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledSystem<T> {
    pub a: Matrix<T>,
    pub c: Matrix<T>,
    pub b: Matrix<T>,
    pub d: Matrix<T>,
}

impl<T: Real> ControlledSystem<T> {
    pub fn new(a: Matrix<T>, c: Matrix<T>, b: Matrix<T>, d: Matrix<T>) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() || c.shape() != (n, n) || b.rows() != n || d.shape() != b.shape() {
            return Err(Error::Dimension(format!(
                "[A, C; B, D] shapes {:?} {:?} {:?} {:?} do not conform",
                a.shape(),
                c.shape(),
                b.shape(),
                d.shape()
            )));
        }
        Ok(Self { a, c, b, d })
    }

    pub fn scalar(a: T, c: T, b: T, d: T) -> Self {
        Self {
            a: Matrix::scalar(a),
            c: Matrix::scalar(c),
            b: Matrix::scalar(b),
            d: Matrix::scalar(d),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn control_dim(&self) -> usize {
        self.b.cols()
    }

    /// `[A + BΘ, C + DΘ]`.
    pub fn closed_loop(&self, theta: &Matrix<T>) -> UncontrolledSystem<T> {
        assert_eq!(
            theta.shape(),
            (self.control_dim(), self.state_dim()),
            "feedback gain must be m x n"
        );
        UncontrolledSystem {
            a: &self.a + &(&self.b * theta),
            c: &self.c + &(&self.d * theta),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityReport<T> {
    pub stable: bool,
    /// Solution of `PA + AᵀP + CᵀPC + I = 0`, absent when the operator is singular.
    pub lyapunov_p: Option<SymMatrix<T>>,
    pub residual_norm: T,
    pub spectral_abscissa: T,
    /// Abscissa fell inside the boundary band; reported as not stable.
    pub boundary: bool,
}

/// `PA + AᵀP + CᵀPC + Λ`.
pub fn lyapunov_residual<T: Real>(
    sys: &UncontrolledSystem<T>,
    p: &SymMatrix<T>,
    lambda: &SymMatrix<T>,
) -> Matrix<T> {
    let pa = p.as_matrix() * &sys.a;
    let ctpc = &(&sys.c.transpose() * p.as_matrix()) * &sys.c;
    &(&(&pa + &pa.transpose()) + &ctpc) + lambda.as_matrix()
}

/// Solves `PA + AᵀP + CᵀPC + Λ = 0` through the full `n²` vectorized
/// system, symmetrizes, and applies one step of iterative refinement.
/// The solution need not be positive definite.
pub fn solve_lyapunov<T: Real>(
    sys: &UncontrolledSystem<T>,
    lambda: &SymMatrix<T>,
) -> Result<SymMatrix<T>> {
    let n = sys.dim();
    if lambda.dim() != n {
        return Err(Error::Dimension(format!(
            "Λ is {0}x{0}, system is {n}x{n}",
            lambda.dim()
        )));
    }
    let lu = Lu::new(&sys.generator(), T::lit(1e-12))?;
    let rhs: Vec<T> = lambda.vec().iter().map(|&x| -x).collect();
    let mut p = SymMatrix::symmetrize(Matrix::unvec(&lu.solve(&rhs), n, n));
    let r = lyapunov_residual(sys, &p, lambda);
    if r.max_abs() > T::zero() {
        let neg: Vec<T> = r.vec().iter().map(|&x| -x).collect();
        let dp = Matrix::unvec(&lu.solve(&neg), n, n);
        let refined = SymMatrix::symmetrize(p.as_matrix() + &dp);
        if lyapunov_residual(sys, &refined, lambda).max_abs() < r.max_abs() {
            p = refined;
        }
    }
    Ok(p)
}

/// Decides L²-stability by the Lyapunov and spectral routes and checks
/// that they agree. Inside the boundary band the system is reported as
/// not stable without an agreement check.
pub fn is_l2_stable<T: Real>(sys: &UncontrolledSystem<T>) -> Result<StabilityReport<T>> {
    let n = sys.dim();
    let abscissa = sys.abscissa();
    let identity = SymMatrix::identity(n);
    let (lyapunov_p, residual_norm) = match solve_lyapunov(sys, &identity) {
        Ok(p) => {
            let r = lyapunov_residual(sys, &p, &identity).max_abs();
            (Some(p), r)
        }
        Err(Error::SingularOperator) => (None, T::infinity()),
        Err(e) => return Err(e),
    };
    let band = T::lit(BOUNDARY_BAND);
    let boundary = abscissa.abs() <= band;
    let spectral_stable = abscissa < -band;
    let lyapunov_stable = lyapunov_p.as_ref().is_some_and(|p| is_pd(p, T::zero()));
    if !boundary && spectral_stable != lyapunov_stable {
        return Err(Error::InconsistentRoutes {
            lyapunov: lyapunov_stable,
            abscissa: abscissa.as_f64(),
        });
    }
    Ok(StabilityReport {
        stable: spectral_stable && !boundary,
        lyapunov_p,
        residual_norm,
        spectral_abscissa: abscissa,
        boundary,
    })
}

/// Whether `Θ` makes `[A + BΘ, C + DΘ]` L²-stable.
pub fn is_stabilizer<T: Real>(theta: &Matrix<T>, sys: &ControlledSystem<T>) -> Result<bool> {
    if theta.shape() != (sys.control_dim(), sys.state_dim()) {
        return Err(Error::Dimension(format!(
            "gain is {:?}, expected {}x{}",
            theta.shape(),
            sys.control_dim(),
            sys.state_dim()
        )));
    }
    Ok(is_l2_stable(&sys.closed_loop(theta))?.stable)
}

/// Outcome of a stabilizer search over `Θ = base + U·ξ`.
#[derive(Debug, Clone)]
pub struct StabilizerFound<T> {
    pub theta: Matrix<T>,
    /// The free parameter `ξ` (`k×n`) with `Θ = base + U ξ`.
    pub xi: Matrix<T>,
    pub abscissa: T,
    pub restart: usize,
}

const RESTART_BATCH: usize = 8;

/// Searches the affine family `Θ = base + U ξ` (`U` is `m×k`) for a
/// stabilizer by minimizing the closed-loop abscissa with Nelder–Mead from
/// `budget` seeded starting points: restart 0 starts at `ξ = 0`, the rest
/// at Gaussian points drawn from stream `restart` of a ChaCha generator
/// keyed by `seed`. Restarts run in parallel batches; the winner of the
/// first batch containing a success is the one with the smallest
/// `(abscissa, restart)`, so the result does not depend on scheduling.
pub fn search_stabilizer<T: Real>(
    sys: &ControlledSystem<T>,
    base: &Matrix<T>,
    directions: &Matrix<T>,
    budget: usize,
    seed: u64,
) -> Option<StabilizerFound<T>>
{
    let n = sys.state_dim();
    let k = directions.cols();
    let theta_of = |xi: &[T]| -> Matrix<T> {
        let xi = Matrix::from_raw(k, n, xi.to_vec());
        base + &(directions * &xi)
    };
    let objective = |xi: &[T]| sys.closed_loop(&theta_of(xi)).abscissa();
    let margin = T::lit(STABILIZER_MARGIN);

    let run = |restart: usize| -> (usize, Vec<T>, T) {
        let x0: Vec<T> = if restart == 0 {
            vec![T::zero(); k * n]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(restart as u64);
            let spread = T::one() + T::lit(restart as f64) * T::lit(0.5);
            (0..k * n)
                .map(|_| spread * T::sample_normal(&mut rng))
                .collect()
        };
        let m = nelder_mead(objective, &x0, NelderMeadOptions::default());
        (restart, m.x, m.value)
    };

    let mut start = 0;
    while start < budget {
        let end = (start + RESTART_BATCH).min(budget);
        let mut results: Vec<_> = (start..end).into_par_iter().map(run).collect();
        results.retain(|r| r.2 < margin);
        results.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(a.0.cmp(&b.0)));
        if let Some((restart, xi, abscissa)) = results.into_iter().next() {
            let theta = theta_of(&xi);
            return Some(StabilizerFound {
                theta,
                xi: Matrix::from_raw(k, n, xi),
                abscissa,
                restart,
            });
        }
        start = end;
    }
    None
}

/// Finds some stabilizer of `[A, C; B, D]` (see [`search_stabilizer`]).
/// Failure after `budget` restarts is not a proof that none exists.
pub fn synthesize_stabilizer<T: Real>(
    sys: &ControlledSystem<T>,
    budget: usize,
    seed: u64,
) -> Result<Matrix<T>>
{
    if budget == 0 {
        return Err(Error::InvalidArgument("stabilizer budget must be at least 1".into()));
    }
    let (m, n) = (sys.control_dim(), sys.state_dim());
    search_stabilizer(sys, &Matrix::zeros(m, n), &Matrix::identity(m), budget, seed)
        .map(|f| f.theta)
        .ok_or(Error::NotFound { budget })
}

/// Open interval of stabilizing gains for `n = m = 1`, where `Θ`
/// stabilizes iff `D²Θ² + 2(B + CD)Θ + 2A + C² < 0`. Half-lines use
/// infinite endpoints; `None` means no stabilizer exists. Returns `None`
/// also for non-scalar systems.
pub fn scalar_stabilizer_interval<T: Real>(sys: &ControlledSystem<T>) -> Option<(T, T)> {
    if sys.state_dim() != 1 || sys.control_dim() != 1 {
        return None;
    }
    let (a, c, b, d) = (sys.a[(0, 0)], sys.c[(0, 0)], sys.b[(0, 0)], sys.d[(0, 0)]);
    let k0 = T::lit(2.0) * a + c * c;
    let k1 = b + c * d;
    if d == T::zero() {
        return if k1 > T::zero() {
            Some((T::neg_infinity(), -k0 / (T::lit(2.0) * k1)))
        } else if k1 < T::zero() {
            Some((-k0 / (T::lit(2.0) * k1), T::infinity()))
        } else if k0 < T::zero() {
            Some((T::neg_infinity(), T::infinity()))
        } else {
            None
        };
    }
    let d2 = d * d;
    let disc = k1 * k1 - d2 * k0;
    if disc <= T::zero() {
        return None;
    }
    let r = disc.sqrt();
    Some(((-k1 - r) / d2, (-k1 + r) / d2))
}
