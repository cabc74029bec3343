//! The game algebraic Riccati equation
//!
//! ```text
//! M(P) − L(P) N(P)† L(P)ᵀ = 0,
//! M(P) = PA + AᵀP + CᵀPC + Q,  L(P) = PB + CᵀPD + Sᵀ,  N(P) = R + DᵀPD,
//! ```
//!
//! together with its range condition `L(I − NN†) = 0`, the sign
//! conditions on the two players' diagonal blocks of `N(P)`, and the
//! classification of stabilizing solutions.

mod classify;
pub mod poly;
mod solve;

pub use classify::{classify, gain_from_pi, in_script_p, AREClassification, ClassifyOptions};
pub use solve::{solve_are, SolveOptions, Strategy};

use crate::error::{Error, Result};
use crate::exppoly::ExpPoly;
use crate::matcore::{Matrix, SymMatrix, PINV_TOL};
use crate::scalar::Real;
use crate::stability::{ControlledSystem, UncontrolledSystem};

/// State equation coefficients `dX = (AX + B₁u₁ + B₂u₂ + b)dt + (CX + D₁u₁ + D₂u₂ + σ)dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSystem<T> {
    pub a: Matrix<T>,
    pub c: Matrix<T>,
    pub b1: Matrix<T>,
    pub b2: Matrix<T>,
    pub d1: Matrix<T>,
    pub d2: Matrix<T>,
}

/// Running cost weights `⟨Q X, X⟩ + 2⟨S X, u⟩ + ⟨R u, u⟩` with
/// `S = [S₁; S₂]` and `R = [[R₁₁, R₁₂], [R₁₂ᵀ, R₂₂]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameCost<T> {
    pub q: SymMatrix<T>,
    pub s1: Matrix<T>,
    pub s2: Matrix<T>,
    pub r11: SymMatrix<T>,
    pub r12: Matrix<T>,
    pub r22: SymMatrix<T>,
}

/// Deterministic forcing: drift offset `b`, diffusion offset `σ`, and the
/// linear cost weights `q` (state) and `ρ₁`, `ρ₂` (controls).
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingTerms<T> {
    pub b: ExpPoly<T>,
    pub sigma: ExpPoly<T>,
    pub q: ExpPoly<T>,
    pub rho1: ExpPoly<T>,
    pub rho2: ExpPoly<T>,
}

impl<T: Real> ForcingTerms<T> {
    pub fn zero(n: usize, m1: usize, m2: usize) -> Self {
        Self {
            b: ExpPoly::zero(n),
            sigma: ExpPoly::zero(n),
            q: ExpPoly::zero(n),
            rho1: ExpPoly::zero(m1),
            rho2: ExpPoly::zero(m2),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.b.is_zero()
            && self.sigma.is_zero()
            && self.q.is_zero()
            && self.rho1.is_zero()
            && self.rho2.is_zero()
    }

    /// Stacked `ρ = (ρ₁; ρ₂)`.
    pub fn rho(&self) -> ExpPoly<T> {
        self.rho1.concat(&self.rho2)
    }

    /// Slowest decay rate over all nonzero terms.
    pub fn min_rate(&self) -> Option<T> {
        [&self.b, &self.sigma, &self.q, &self.rho1, &self.rho2]
            .iter()
            .filter_map(|f| f.min_rate())
            .reduce(|a, b| a.min(b))
    }

    pub fn cast<U: Real>(&self) -> ForcingTerms<U> {
        ForcingTerms {
            b: self.b.cast(),
            sigma: self.sigma.cast(),
            q: self.q.cast(),
            rho1: self.rho1.cast(),
            rho2: self.rho2.cast(),
        }
    }
}

/// A validated two-player zero-sum LQ game. Player 1 (`u₁`) minimizes,
/// player 2 (`u₂`) maximizes. `m₂ = 0` is the one-player problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec<T> {
    system: GameSystem<T>,
    cost: GameCost<T>,
    forcing: ForcingTerms<T>,
    b: Matrix<T>,
    d: Matrix<T>,
    s: Matrix<T>,
    r: SymMatrix<T>,
}

fn check_shape<T: Real>(name: &str, m: &Matrix<T>, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::Dimension(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::Dimension(format!("{name} has non-finite entries")));
    }
    Ok(())
}

impl<T: Real> GameSpec<T> {
    pub fn new(system: GameSystem<T>, cost: GameCost<T>, forcing: ForcingTerms<T>) -> Result<Self> {
        let n = system.a.rows();
        let m1 = system.b1.cols();
        let m2 = system.b2.cols();
        check_shape("A", &system.a, n, n)?;
        check_shape("C", &system.c, n, n)?;
        check_shape("B1", &system.b1, n, m1)?;
        check_shape("B2", &system.b2, n, m2)?;
        check_shape("D1", &system.d1, n, m1)?;
        check_shape("D2", &system.d2, n, m2)?;
        check_shape("Q", &cost.q, n, n)?;
        check_shape("S1", &cost.s1, m1, n)?;
        check_shape("S2", &cost.s2, m2, n)?;
        check_shape("R11", &cost.r11, m1, m1)?;
        check_shape("R12", &cost.r12, m1, m2)?;
        check_shape("R22", &cost.r22, m2, m2)?;
        let dims = [
            ("b", forcing.b.dim(), n),
            ("sigma", forcing.sigma.dim(), n),
            ("q", forcing.q.dim(), n),
            ("rho1", forcing.rho1.dim(), m1),
            ("rho2", forcing.rho2.dim(), m2),
        ];
        if let Some((name, got, want)) = dims.iter().find(|(_, g, w)| g != w) {
            return Err(Error::Dimension(format!(
                "forcing {name} has dimension {got}, expected {want}"
            )));
        }
        let b = system.b1.hstack(&system.b2);
        let d = system.d1.hstack(&system.d2);
        let s = cost.s1.vstack(&cost.s2);
        let r = SymMatrix::symmetrize(
            cost.r11
                .as_matrix()
                .hstack(&cost.r12)
                .vstack(&cost.r12.transpose().hstack(cost.r22.as_matrix())),
        );
        Ok(Self {
            system,
            cost,
            forcing,
            b,
            d,
            s,
            r,
        })
    }

    /// One-player problem (`m₂ = 0`).
    #[allow(clippy::too_many_arguments)]
    pub fn one_player(
        a: Matrix<T>,
        b: Matrix<T>,
        c: Matrix<T>,
        d: Matrix<T>,
        q: SymMatrix<T>,
        s: Matrix<T>,
        r: SymMatrix<T>,
    ) -> Result<Self> {
        let n = a.rows();
        let m = b.cols();
        Self::new(
            GameSystem {
                a,
                c,
                b1: b,
                b2: Matrix::zeros(n, 0),
                d1: d,
                d2: Matrix::zeros(n, 0),
            },
            GameCost {
                q,
                s1: s,
                s2: Matrix::zeros(0, n),
                r11: r,
                r12: Matrix::zeros(m, 0),
                r22: SymMatrix::zeros(0),
            },
            ForcingTerms::zero(n, m, 0),
        )
    }

    /// Scalar one-player problem.
    #[allow(clippy::too_many_arguments)]
    pub fn scalar_one_player(a: T, b: T, c: T, d: T, q: T, s: T, r: T) -> Self {
        let m = Matrix::scalar;
        Self::one_player(m(a), m(b), m(c), m(d), SymMatrix::scalar(q), m(s), SymMatrix::scalar(r))
            .expect("scalar data conforms")
    }

    pub fn with_forcing(self, forcing: ForcingTerms<T>) -> Result<Self> {
        Self::new(self.system, self.cost, forcing)
    }

    pub fn system(&self) -> &GameSystem<T> {
        &self.system
    }

    pub fn cost(&self) -> &GameCost<T> {
        &self.cost
    }

    pub fn forcing(&self) -> &ForcingTerms<T> {
        &self.forcing
    }

    pub fn state_dim(&self) -> usize {
        self.system.a.rows()
    }

    pub fn m1(&self) -> usize {
        self.system.b1.cols()
    }

    pub fn m2(&self) -> usize {
        self.system.b2.cols()
    }

    pub fn control_dim(&self) -> usize {
        self.m1() + self.m2()
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.system.a
    }

    pub fn c(&self) -> &Matrix<T> {
        &self.system.c
    }

    /// Stacked `B = (B₁, B₂)`.
    pub fn b(&self) -> &Matrix<T> {
        &self.b
    }

    /// Stacked `D = (D₁, D₂)`.
    pub fn d(&self) -> &Matrix<T> {
        &self.d
    }

    pub fn q(&self) -> &SymMatrix<T> {
        &self.cost.q
    }

    /// Stacked `S = [S₁; S₂]`.
    pub fn s(&self) -> &Matrix<T> {
        &self.s
    }

    /// Assembled `R`.
    pub fn r(&self) -> &SymMatrix<T> {
        &self.r
    }

    pub fn uncontrolled(&self) -> UncontrolledSystem<T> {
        UncontrolledSystem {
            a: self.system.a.clone(),
            c: self.system.c.clone(),
        }
    }

    pub fn controlled(&self) -> ControlledSystem<T> {
        ControlledSystem {
            a: self.system.a.clone(),
            c: self.system.c.clone(),
            b: self.b.clone(),
            d: self.d.clone(),
        }
    }

    /// Absolute cutoff below which eigenvalues of `N(P)` count as zero:
    /// `PINV_TOL · (1 + ‖R‖ + ‖D‖²‖P‖)` in max-norms.
    pub fn pinv_floor(&self, p: &SymMatrix<T>) -> T {
        let dn = self.d.max_abs();
        T::lit(PINV_TOL) * (T::one() + self.r.max_abs() + dn * dn * p.max_abs())
    }

    pub fn cast<U: Real>(&self) -> GameSpec<U> {
        GameSpec::new(
            GameSystem {
                a: self.system.a.cast(),
                c: self.system.c.cast(),
                b1: self.system.b1.cast(),
                b2: self.system.b2.cast(),
                d1: self.system.d1.cast(),
                d2: self.system.d2.cast(),
            },
            GameCost {
                q: self.cost.q.cast(),
                s1: self.cost.s1.cast(),
                s2: self.cost.s2.cast(),
                r11: self.cost.r11.cast(),
                r12: self.cost.r12.cast(),
                r22: self.cost.r22.cast(),
            },
            self.forcing.cast(),
        )
        .expect("cast preserves shapes")
    }
}

/// `M(P)`, `L(P)`, `N(P)` evaluated at `at_p`.
#[derive(Debug, Clone)]
pub struct MLN<T> {
    pub m: SymMatrix<T>,
    pub l: Matrix<T>,
    pub n: SymMatrix<T>,
    pub at_p: SymMatrix<T>,
    /// `N(P)†` with the cutoff of [`GameSpec::pinv_floor`].
    pub n_pinv: SymMatrix<T>,
}

pub fn mln<T: Real>(spec: &GameSpec<T>, p: &SymMatrix<T>) -> MLN<T> {
    assert_eq!(p.dim(), spec.state_dim(), "P must be n x n");
    let (a, c, b, d) = (spec.a(), spec.c(), spec.b(), spec.d());
    let pm = p.as_matrix();
    let pa = pm * a;
    let ct = c.transpose();
    let ctp = &ct * pm;
    let m = SymMatrix::symmetrize(&(&(&pa + &pa.transpose()) + &(&ctp * c)) + spec.q().as_matrix());
    let l = &(&(pm * b) + &(&ctp * d)) + &spec.s().transpose();
    let n = spec.r().add(&p.congruence(d));
    let n_pinv = n.pseudo_inverse_floor(T::lit(PINV_TOL), spec.pinv_floor(p));
    MLN {
        m,
        l,
        n,
        at_p: p.clone(),
        n_pinv,
    }
}

impl<T: Real> MLN<T> {
    /// `M − L N† Lᵀ`, symmetrized.
    pub fn residual(&self) -> SymMatrix<T> {
        self.m.sub(&self.n_pinv.congruence(&self.l.transpose()))
    }

    /// `1 + ‖M‖_max + ‖L N† Lᵀ‖_max`; residual tolerances are relative to it.
    pub fn residual_scale(&self) -> T {
        let lnl = self.n_pinv.congruence(&self.l.transpose());
        T::one() + self.m.as_matrix().max_abs() + lnl.as_matrix().max_abs()
    }

    /// `I − N†N`.
    pub fn projector(&self) -> Matrix<T> {
        let k = self.n.dim();
        &Matrix::identity(k) - &(self.n_pinv.as_matrix() * self.n.as_matrix())
    }

    /// `−N†Lᵀ`.
    pub fn base_gain(&self) -> Matrix<T> {
        -(self.n_pinv.as_matrix() * &self.l.transpose())
    }
}

/// `M(P) − L(P) N(P)† L(P)ᵀ`, symmetrized.
pub fn are_residual<T: Real>(spec: &GameSpec<T>, p: &SymMatrix<T>) -> SymMatrix<T> {
    mln(spec, p).residual()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::exppoly::ExpTerm;

    pub fn nonstabilizing() -> GameSpec<f64> {
        GameSpec::scalar_one_player(-2.0, -1.0, 2.0, 1.0, 2.0, 0.0, -0.5)
    }

    pub fn singular() -> GameSpec<f64> {
        GameSpec::scalar_one_player(-0.25, -2.0, 1.0, 1.0, 0.5, -1.0, 1.0)
    }

    pub fn two_player_scalar() -> GameSpec<f64> {
        let s = Matrix::scalar;
        GameSpec::new(
            GameSystem {
                a: s(-1.0),
                c: s(0.0),
                b1: s(1.0),
                b2: s(1.0),
                d1: s(0.0),
                d2: s(0.0),
            },
            GameCost {
                q: SymMatrix::scalar(1.0),
                s1: s(0.0),
                s2: s(0.0),
                r11: SymMatrix::scalar(1.0),
                r12: s(0.0),
                r22: SymMatrix::scalar(-1.0),
            },
            ForcingTerms::zero(1, 1, 1),
        )
        .unwrap()
    }

    pub fn two_player_forced() -> GameSpec<f64> {
        let mut f = ForcingTerms::zero(1, 1, 1);
        f.b = ExpPoly::new(1, vec![ExpTerm::new(vec![1.0], 0, 1.0).unwrap()]).unwrap();
        two_player_scalar().with_forcing(f).unwrap()
    }
}
