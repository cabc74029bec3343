//! Closed-loop saddle points of the zero-sum game.
//!
//! Given a stabilizing solution `P` of the game ARE with stabilizer
//! `Θ* = −N†Lᵀ + (I − N†N)Π`, the affine part comes from the backward
//! equation
//!
//! ```text
//! η′ = −Âη − ψ,  Â = Aᵀ − L N† Bᵀ,
//! ψ = (Cᵀ − L N† Dᵀ) P σ − L N† ρ + P b + q,
//! ```
//!
//! (with `ζ ≡ 0` for deterministic forcing), the feedforward control is
//! `u* = −N†(Bᵀη + DᵀPσ + ρ)`, and the value is
//! `V(x) = ⟨Px, x⟩ + 2⟨η(0), x⟩ + ∫₀^∞ [⟨Pσ, σ⟩ + 2⟨η, b⟩ − ⟨N†v, v⟩] dt`
//! with `v = Bᵀη + DᵀPσ + ρ`.

use std::fmt;

use crate::bsde::backward_exponential_integral;
use crate::error::{Error, Result};
use crate::exppoly::ExpPoly;
use crate::matcore::{is_psd, Matrix, SymMatrix};
use crate::riccati::{
    classify, gain_from_pi, mln, solve_are, AREClassification, ClassifyOptions, GameSpec, SolveOptions,
};
use crate::scalar::Real;
use crate::stability::is_stabilizer;

#[derive(Debug, Clone)]
pub struct SaddleOptions<T> {
    pub solve: SolveOptions<T>,
    pub classify: ClassifyOptions<T>,
    /// Tolerance on `(I − NN†)v(t)`, scaled by `1 + |v(t)|`.
    pub range_tol: T,
    /// Number of log-spaced times for the range check.
    pub range_points: usize,
}

impl<T: Real> Default for SaddleOptions<T> {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            classify: ClassifyOptions::default(),
            range_tol: T::lit(1e-8),
            range_points: 64,
        }
    }
}

/// `V(x) = ⟨Px, x⟩ + ⟨linear, x⟩ + constant`.
#[derive(Debug, Clone)]
pub struct ValueFunction<T> {
    pub p: SymMatrix<T>,
    pub linear: Vec<T>,
    pub constant: T,
}

impl<T: Real> ValueFunction<T> {
    pub fn eval(&self, x: &[T]) -> T {
        let lin: T = self.linear.iter().zip(x).map(|(&a, &b)| a * b).sum();
        self.p.quad(x) + lin + self.constant
    }
}

#[derive(Debug, Clone)]
pub struct SaddleSolution<T> {
    pub p: SymMatrix<T>,
    /// `Θ*` (`m×n`); rows `..m₁` belong to player 1.
    pub theta: Matrix<T>,
    pub pi: Matrix<T>,
    pub eta: ExpPoly<T>,
    pub zeta: ExpPoly<T>,
    /// `u*` (`m`-dimensional); components `..m₁` belong to player 1.
    pub u_star: ExpPoly<T>,
    pub value: ValueFunction<T>,
    pub m1: usize,
    pub classification: AREClassification<T>,
    /// Spectral abscissa of `Â`.
    pub a_hat_abscissa: T,
}

impl<T: Real> SaddleSolution<T> {
    pub fn theta1(&self) -> Matrix<T> {
        self.theta.block(0, 0, self.m1, self.theta.cols())
    }

    pub fn theta2(&self) -> Matrix<T> {
        self.theta
            .block(self.m1, 0, self.theta.rows() - self.m1, self.theta.cols())
    }

    pub fn u1_star(&self, t: T) -> Vec<T> {
        self.u_star.eval(t)[..self.m1].to_vec()
    }

    pub fn u2_star(&self, t: T) -> Vec<T> {
        self.u_star.eval(t)[self.m1..].to_vec()
    }

    /// The same saddle point with another free parameter `Π`; fails if the
    /// resulting gain is not a stabilizer.
    pub fn with_pi(&self, spec: &GameSpec<T>, pi: Matrix<T>) -> Result<Self> {
        if pi.shape() != self.pi.shape() {
            return Err(Error::Dimension(format!(
                "Π is {:?}, expected {:?}",
                pi.shape(),
                self.pi.shape()
            )));
        }
        let theta = gain_from_pi(&mln(spec, &self.p), &pi);
        if !is_stabilizer(&theta, &spec.controlled())? {
            return Err(Error::NotStable);
        }
        Ok(Self {
            theta,
            pi,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone)]
pub enum Diagnosis<T> {
    /// No ARE solution admits a stabilizing gain. Lists each solution found
    /// with its classification.
    NoStabilizingSolution {
        candidates: Vec<(SymMatrix<T>, AREClassification<T>)>,
    },
    /// Some candidate has a nontrivial projector and the `Π`-search failed.
    StabilizerSearchInconclusive {
        candidates: Vec<(SymMatrix<T>, AREClassification<T>)>,
    },
    /// `Bᵀη + DᵀPσ + ρ` leaves the range of `N(P)`.
    RangeViolation { p: SymMatrix<T>, time: T, residual: T },
    /// `Â` is not Hurwitz, so the backward equation has no decaying solution.
    EtaNotSolvable { p: SymMatrix<T>, abscissa: T },
    Numerical(Error),
}

impl<T: Real> fmt::Display for Diagnosis<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnosis::NoStabilizingSolution { candidates } => {
                write!(f, "no stabilizing ARE solution ({} solution(s) found", candidates.len())?;
                for (p, c) in candidates {
                    write!(f, "; P = {:?}, gain -N^+L^T = {:?}", p.as_matrix().to_rows(), c.base_gain.to_rows())?;
                }
                write!(f, ")")
            }
            Diagnosis::StabilizerSearchInconclusive { candidates } => write!(
                f,
                "stabilizer search over the projector range was inconclusive for {} candidate(s)",
                candidates.len()
            ),
            Diagnosis::RangeViolation { time, residual, .. } => {
                write!(f, "range condition violated at t = {time} (residual {:e})", residual.as_f64())
            }
            Diagnosis::EtaNotSolvable { abscissa, .. } => {
                write!(f, "eta equation drift is not Hurwitz (abscissa {abscissa})")
            }
            Diagnosis::Numerical(e) => write!(f, "{e}"),
        }
    }
}

impl<T> From<Error> for Diagnosis<T> {
    fn from(e: Error) -> Self {
        Diagnosis::Numerical(e)
    }
}

fn range_grid<T: Real>(span: T, points: usize) -> Vec<T> {
    let points = points.max(2);
    let lo = (span * T::lit(1e-4)).ln();
    let hi = span.ln();
    std::iter::once(T::zero())
        .chain((0..points - 1).map(|i| (lo + (hi - lo) * T::lit(i as f64 / (points - 2).max(1) as f64)).exp()))
        .collect()
}

/// Synthesizes the closed-loop saddle point, or explains why not.
pub fn synthesize<T: Real>(spec: &GameSpec<T>, opts: &SaddleOptions<T>) -> std::result::Result<SaddleSolution<T>, Diagnosis<T>> {
    let sols = solve_are(spec, &opts.solve)?;
    let mut candidates = Vec::with_capacity(sols.len());
    let mut chosen = None;
    for p in sols {
        let c = classify(spec, &p, &opts.classify);
        if c.stabilizing {
            chosen = Some((p, c));
            break;
        }
        candidates.push((p, c));
    }
    let Some((p, class)) = chosen else {
        return Err(if candidates.iter().any(|(_, c)| c.inconclusive) {
            Diagnosis::StabilizerSearchInconclusive { candidates }
        } else {
            Diagnosis::NoStabilizingSolution { candidates }
        });
    };

    let v = mln(spec, &p);
    let f = spec.forcing();
    let l_npinv = &v.l * v.n_pinv.as_matrix();
    let pm = p.as_matrix();
    // Âᵀ = A − B N† Lᵀ
    let a_hat_t = spec.a() - &(spec.b() * &l_npinv.transpose());
    let a_hat_abscissa = crate::matcore::spectral_abscissa(&a_hat_t)?;
    let psi_sigma = &spec.c().transpose() - &(&l_npinv * &spec.d().transpose());
    let psi = f
        .sigma
        .apply(pm)
        .apply(&psi_sigma)
        .add(&f.rho().apply(&l_npinv).scale(-T::one()))
        .add(&f.b.apply(pm))
        .add(&f.q);
    let eta = match backward_exponential_integral(&a_hat_t, &psi) {
        Ok(e) => e,
        Err(Error::NotHurwitz { .. }) => {
            return Err(Diagnosis::EtaNotSolvable {
                p,
                abscissa: a_hat_abscissa,
            })
        }
        Err(e) => return Err(e.into()),
    };

    let dtp = &spec.d().transpose() * pm;
    let vv = eta
        .apply(&spec.b().transpose())
        .add(&f.sigma.apply(&dtp))
        .add(&f.rho());
    if let Some(rate) = vv.min_rate() {
        let k = spec.control_dim();
        let leak = &Matrix::identity(k) - &(v.n.as_matrix() * v.n_pinv.as_matrix());
        for t in range_grid(T::lit(10.0) / rate, opts.range_points) {
            let vt = vv.eval(t);
            let r = leak.mul_vec(&vt).iter().fold(T::zero(), |m, x| m.max(x.abs()));
            let scale = T::one() + vt.iter().fold(T::zero(), |m, x| m.max(x.abs()));
            if r > opts.range_tol * scale {
                return Err(Diagnosis::RangeViolation { p, time: t, residual: r });
            }
        }
    }

    let u_star = vv.apply(v.n_pinv.as_matrix()).scale(-T::one());
    let sigma_p = f.sigma.apply(pm);
    let constant = sigma_p.inner_integral(&f.sigma) + T::lit(2.0) * eta.inner_integral(&f.b)
        - vv.apply(v.n_pinv.as_matrix()).inner_integral(&vv);
    let linear = eta.eval(T::zero()).into_iter().map(|x| x + x).collect();
    let theta = class.gain.clone().expect("stabilizing classification carries a gain");
    let pi = class.pi.clone().expect("stabilizing classification carries Π");
    Ok(SaddleSolution {
        value: ValueFunction {
            p: p.clone(),
            linear,
            constant,
        },
        p,
        theta,
        pi,
        zeta: ExpPoly::zero(eta.dim()),
        eta,
        u_star,
        m1: spec.m1(),
        classification: class,
        a_hat_abscissa,
    })
}

pub fn value_at<T: Real>(sol: &SaddleSolution<T>, x: &[T]) -> T {
    sol.value.eval(x)
}

/// Necessary conditions for `Θ` to be an optimal closed-loop gain of the
/// one-player problem, checked against an ARE solution.
#[derive(Debug, Clone)]
pub struct NecessityReport<T> {
    /// The ARE solution the conditions were checked against.
    pub p: Option<SymMatrix<T>>,
    pub residual_ok: bool,
    /// `R + DᵀPD ⪰ 0`.
    pub n_psd: bool,
    pub range_ok: bool,
    /// `N(P)Θ + L(P)ᵀ = 0`.
    pub gain_identity: bool,
    pub stabilizer: bool,
}

impl<T> NecessityReport<T> {
    pub fn are_conditions(&self) -> bool {
        self.residual_ok && self.n_psd && self.range_ok && self.gain_identity
    }

    pub fn all_pass(&self) -> bool {
        self.are_conditions() && self.stabilizer
    }
}

/// Checks `Θ` against every ARE solution found and reports the one that
/// satisfies the most conditions (ties broken by solver order).
pub fn one_player_necessity_check<T: Real>(
    spec: &GameSpec<T>,
    theta: &Matrix<T>,
    tol: T,
) -> Result<NecessityReport<T>> {
    if spec.m2() != 0 {
        return Err(Error::InvalidArgument("necessity check needs a one-player spec".into()));
    }
    let sys = spec.controlled();
    let stabilizer = is_stabilizer(theta, &sys)?;
    let sols = solve_are(spec, &SolveOptions::default())?;
    let mut best: Option<(usize, NecessityReport<T>)> = None;
    for p in sols {
        let v = mln(spec, &p);
        let c = classify(spec, &p, &ClassifyOptions { stab_budget: 1, ..Default::default() });
        let gi = (&(v.n.as_matrix() * theta) + &v.l.transpose()).max_abs();
        let report = NecessityReport {
            residual_ok: c.residual_norm <= tol,
            n_psd: is_psd(&v.n, tol),
            range_ok: c.range_ok,
            gain_identity: gi <= tol * (T::one() + v.l.max_abs()),
            stabilizer,
            p: Some(p),
        };
        let score = [report.residual_ok, report.n_psd, report.range_ok, report.gain_identity]
            .iter()
            .filter(|&&b| b)
            .count();
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, report));
        }
    }
    Ok(best.map(|(_, r)| r).unwrap_or(NecessityReport {
        p: None,
        residual_ok: false,
        n_psd: false,
        range_ok: false,
        gain_identity: false,
        stabilizer,
    }))
}
