//! Infinite-horizon linear BSDE
//!
//! ```text
//! dY = −[AᵀY + CᵀZ + φ]dt + Z dW,   t ∈ [0, ∞),
//! ```
//!
//! with `[A, C]` mean-square stable. For deterministic drivers the unique
//! square-integrable solution has `Z ≡ 0` and
//! `Y(t) = ∫ₜ^∞ e^{Aᵀ(s−t)} φ(s) ds`, computed in closed form for
//! exponential-polynomial `φ`. A truncated construction (driver cut off at
//! a horizon `k`, solved backwards from `Y(k) = 0`) and a Monte-Carlo
//! duality estimator `⟨Y(0), x⟩ = E∫₀^∞ ⟨φ, X(·; x)⟩ dt` provide
//! independent checks.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exppoly::ExpPoly;
use crate::matcore::{spectral_abscissa, Matrix, SymMatrix};
use crate::scalar::Real;
use crate::stability::{is_l2_stable, solve_lyapunov, UncontrolledSystem};
use crate::stats::{path_rng, Estimate};

/// A driver evaluated along each sample path from `(t, W(t))`.
pub type PathwiseDriver<T> = Arc<dyn Fn(T, T) -> Vec<T> + Send + Sync>;

#[derive(Clone)]
pub enum Driver<T> {
    Deterministic(ExpPoly<T>),
    /// Stochastic driver adapted to the Brownian filtration; only the
    /// duality estimator accepts it.
    Pathwise(PathwiseDriver<T>),
}

impl<T: fmt::Debug> fmt::Debug for Driver<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Driver::Deterministic(p) => f.debug_tuple("Deterministic").field(p).finish(),
            Driver::Pathwise(_) => f.write_str("Pathwise(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BSDESpec<T> {
    system: UncontrolledSystem<T>,
    driver: Driver<T>,
}

impl<T: Real> BSDESpec<T> {
    /// Fails with [`Error::NotStable`] unless `[A, C]` is L²-stable.
    pub fn new(system: UncontrolledSystem<T>, driver: Driver<T>) -> Result<Self> {
        if let Driver::Deterministic(p) = &driver {
            if p.dim() != system.dim() {
                return Err(Error::Dimension(format!(
                    "driver has dimension {}, system {}",
                    p.dim(),
                    system.dim()
                )));
            }
        }
        if !is_l2_stable(&system)?.stable {
            return Err(Error::NotStable);
        }
        Ok(Self { system, driver })
    }

    pub fn deterministic(system: UncontrolledSystem<T>, phi: ExpPoly<T>) -> Result<Self> {
        Self::new(system, Driver::Deterministic(phi))
    }

    pub fn system(&self) -> &UncontrolledSystem<T> {
        &self.system
    }

    pub fn driver(&self) -> &Driver<T> {
        &self.driver
    }

    fn phi(&self) -> Result<&ExpPoly<T>> {
        match &self.driver {
            Driver::Deterministic(p) => Ok(p),
            Driver::Pathwise(_) => Err(Error::InvalidArgument(
                "a deterministic driver is required".into(),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BSDESolution<T> {
    /// `Y` in closed form, when available.
    pub closed_form: Option<ExpPoly<T>>,
    /// `Y` on a grid (truncated construction).
    pub times: Vec<T>,
    pub values: Vec<Vec<T>>,
    /// `Y` vanishes after this time (truncated construction).
    pub horizon: Option<T>,
    pub stable_l2: bool,
}

impl<T: Real> BSDESolution<T> {
    pub fn dim(&self) -> usize {
        match &self.closed_form {
            Some(p) => p.dim(),
            None => self.values.first().map_or(0, Vec::len),
        }
    }

    /// `Y(t)`; on a grid, linearly interpolated.
    pub fn y(&self, t: T) -> Vec<T> {
        if let Some(p) = &self.closed_form {
            return p.eval(t);
        }
        let n = self.dim();
        if self.horizon.is_some_and(|k| t >= k) || self.times.is_empty() {
            return vec![T::zero(); n];
        }
        let i = match self.times.binary_search_by(|s| s.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.values[i].clone(),
            Err(0) => return self.values[0].clone(),
            Err(i) => i,
        };
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        self.values[i - 1]
            .iter()
            .zip(&self.values[i])
            .map(|(&a, &b)| a + w * (b - a))
            .collect()
    }

    /// `Z(t)`; identically zero for deterministic drivers.
    pub fn z(&self, _t: T) -> Vec<T> {
        vec![T::zero(); self.dim()]
    }
}

/// `A + Aᵀ + CᵀC`.
pub fn peng_shi_matrix<T: Real>(a: &Matrix<T>, c: &Matrix<T>) -> SymMatrix<T> {
    SymMatrix::symmetrize(&(a + &a.transpose()) + &(&c.transpose() * c))
}

/// The classical sufficient condition `A + Aᵀ + CᵀC ≺ 0`.
pub fn peng_shi_condition<T: Real>(a: &Matrix<T>, c: &Matrix<T>) -> bool {
    a.is_square() && c.shape() == a.shape() && peng_shi_matrix(a, c).max_eigenvalue() < T::zero()
}

/// `∫ₜ^∞ e^{Aᵀ(s−t)} φ(s) ds` for Hurwitz `A`; [`Error::NotHurwitz`]
/// otherwise (skipped when `φ ≡ 0`).
pub fn backward_exponential_integral<T: Real>(a: &Matrix<T>, phi: &ExpPoly<T>) -> Result<ExpPoly<T>> {
    if phi.is_zero() {
        return Ok(ExpPoly::zero(phi.dim()));
    }
    let abscissa = spectral_abscissa(a)?;
    if abscissa >= T::zero() {
        return Err(Error::NotHurwitz {
            abscissa: abscissa.as_f64(),
        });
    }
    phi.backward_integral(&a.transpose())
}

pub fn solve_deterministic<T: Real>(spec: &BSDESpec<T>) -> Result<BSDESolution<T>> {
    let y = backward_exponential_integral(&spec.system.a, spec.phi()?)?;
    Ok(BSDESolution {
        closed_form: Some(y),
        times: Vec::new(),
        values: Vec::new(),
        horizon: None,
        stable_l2: true,
    })
}

/// Driver cut off at `k`: solves `Y′ = −AᵀY − φ` backwards from `Y(k) = 0`
/// with classical RK4 on `steps` uniform steps; `Y = 0` on `(k, ∞)`.
pub fn solve_truncated<T: Real>(spec: &BSDESpec<T>, k: T, steps: usize) -> Result<BSDESolution<T>> {
    if !(k > T::zero()) || steps == 0 {
        return Err(Error::InvalidArgument("horizon and step count must be positive".into()));
    }
    let phi = spec.phi()?;
    let n = spec.system.dim();
    let at = spec.system.a.transpose();
    let f = |t: T, y: &[T]| -> Vec<T> {
        let ay = at.mul_vec(y);
        let p = phi.eval(t);
        ay.iter().zip(&p).map(|(&u, &v)| -u - v).collect()
    };
    let h = k / T::lit(steps as f64);
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let axpy = |y: &[T], s: T, d: &[T]| -> Vec<T> { y.iter().zip(d).map(|(&a, &b)| a + s * b).collect() };
    let mut values = vec![vec![T::zero(); n]; steps + 1];
    let times: Vec<T> = (0..=steps).map(|i| h * T::lit(i as f64)).collect();
    for i in (0..steps).rev() {
        let t = times[i + 1];
        let y = &values[i + 1];
        let mh = -h;
        let k1 = f(t, y);
        let k2 = f(t + mh * half, &axpy(y, mh * half, &k1));
        let k3 = f(t + mh * half, &axpy(y, mh * half, &k2));
        let k4 = f(t + mh, &axpy(y, mh, &k3));
        values[i] = (0..n)
            .map(|j| y[j] + mh * sixth * (k1[j] + T::lit(2.0) * (k2[j] + k3[j]) + k4[j]))
            .collect();
    }
    Ok(BSDESolution {
        closed_form: None,
        times,
        values,
        horizon: Some(k),
        stable_l2: true,
    })
}

/// Euler–Maruyama parameters for [`duality_estimate_y0`].
#[derive(Debug, Clone, Copy)]
pub struct DualityConfig<T> {
    pub paths: usize,
    pub horizon: T,
    pub dt: T,
    pub seed: u64,
}

/// Monte-Carlo estimate of `E∫₀^T ⟨φ(t), X(t)⟩ dt` with
/// `dX = AX dt + CX dW`, `X(0) = x` (trapezoidal rule on the Euler grid).
/// For fixed configuration the result does not depend on the thread count.
pub fn duality_estimate_y0<T: Real>(spec: &BSDESpec<T>, x: &[T], cfg: &DualityConfig<T>) -> Result<Estimate<T>> {
    let n = spec.system.dim();
    if x.len() != n {
        return Err(Error::Dimension(format!("x has {} entries, expected {n}", x.len())));
    }
    if cfg.paths < 2 || !(cfg.dt > T::zero()) || !(cfg.horizon >= cfg.dt) {
        return Err(Error::InvalidArgument(
            "need paths ≥ 2 and 0 < dt ≤ horizon".into(),
        ));
    }
    let steps = (cfg.horizon / cfg.dt).round().to_usize().unwrap_or(0);
    let dt = cfg.dt;
    let sqdt = dt.sqrt();
    let half = T::lit(0.5);
    let (a, c) = (&spec.system.a, &spec.system.c);
    let phi_at = |t: T, w: T| -> Vec<T> {
        match &spec.driver {
            Driver::Deterministic(p) => p.eval(t),
            Driver::Pathwise(f) => f(t, w),
        }
    };
    let dot = |u: &[T], v: &[T]| -> T { u.iter().zip(v).map(|(&p, &q)| p * q).sum() };
    let samples: Result<Vec<T>> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let mut xs = x.to_vec();
            let mut w = T::zero();
            let mut prev = dot(&phi_at(T::zero(), w), &xs);
            let mut acc = T::zero();
            for s in 0..steps {
                let t = dt * T::lit(s as f64);
                let dw = sqdt * T::sample_normal(&mut rng);
                let ax = a.mul_vec(&xs);
                let cx = c.mul_vec(&xs);
                for j in 0..n {
                    xs[j] += ax[j] * dt + cx[j] * dw;
                }
                w += dw;
                if xs.iter().any(|v| !(v.abs() <= T::lit(1e12))) {
                    return Err(Error::Diverged {
                        path: i,
                        time: (t + dt).as_f64(),
                    });
                }
                let cur = dot(&phi_at(t + dt, w), &xs);
                acc += half * dt * (prev + cur);
                prev = cur;
            }
            Ok(acc)
        })
        .collect();
    Ok(Estimate::from_samples(&samples?))
}

/// `(sup_t |Y(t)|² + ∫₀^∞ |Y|² dt) / ∫₀^∞ |φ|² dt` for a deterministic
/// spec, the supremum taken over a grid on `[0, 20/α_min]`. Zero drivers
/// give `0`.
pub fn apriori_ratio<T: Real>(spec: &BSDESpec<T>) -> Result<T> {
    let phi = spec.phi()?;
    if phi.is_zero() {
        return Ok(T::zero());
    }
    let y = solve_deterministic(spec)?.closed_form.expect("closed form");
    let span = T::lit(20.0) / phi.min_rate().expect("nonzero driver");
    let pts = 4000;
    let sup = (0..=pts)
        .map(|i| {
            let v = y.eval(span * T::lit(i as f64 / pts as f64));
            v.iter().map(|&u| u * u).sum::<T>()
        })
        .fold(T::zero(), T::max);
    Ok((sup + y.inner_integral(&y)) / phi.inner_integral(phi))
}

/// A-priori constant for deterministic drivers. With `X ≻ 0` solving
/// `AX + XAᵀ + I = 0`, `|e^{Aᵀτ}|² ≤ κ² e^{−2λτ}` for
/// `κ² = λ_max(X)/λ_min(X)` and `λ = 1/(2λ_max(X))`; Cauchy–Schwarz bounds
/// `sup|Y|²` by `κ²/(2λ)·∫|φ|²` and Young's inequality bounds `∫|Y|²` by
/// `(κ/λ)²·∫|φ|²`.
pub fn apriori_bound<T: Real>(a: &Matrix<T>) -> Result<T> {
    let n = a.rows();
    let sys = UncontrolledSystem::new(a.transpose(), Matrix::zeros(n, n))?;
    let x = solve_lyapunov(&sys, &SymMatrix::identity(n))?;
    let (lmin, lmax) = (x.min_eigenvalue(), x.max_eigenvalue());
    if !(lmin > T::zero()) {
        return Err(Error::NotHurwitz {
            abscissa: spectral_abscissa(a)?.as_f64(),
        });
    }
    let kappa2 = lmax / lmin;
    let lambda = T::one() / (T::lit(2.0) * lmax);
    Ok(kappa2 / (T::lit(2.0) * lambda) + kappa2 / (lambda * lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exppoly::ExpTerm;

    fn unit_exp() -> ExpPoly<f64> {
        ExpPoly::exponential(vec![1.0], 1.0).unwrap()
    }

    fn spec(a: f64, c: f64, phi: ExpPoly<f64>) -> BSDESpec<f64> {
        BSDESpec::deterministic(UncontrolledSystem::scalar(a, c), phi).unwrap()
    }

    #[test]
    fn peng_shi_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let a = Matrix::from_rows(&[[-1.0, 1.0], [-1.0, 0.0]]);
        let c = Matrix::diag(&[h, h]);
        assert!(!peng_shi_condition(&a, &c));
        let ev = peng_shi_matrix(&a, &c).eigenvalues();
        assert!((ev[0] + 1.5).abs() < 1e-12 && (ev[1] - 0.5).abs() < 1e-12);
        assert!(peng_shi_condition(&Matrix::<f64>::identity(2).scale(-1.0), &Matrix::zeros(2, 2)));
        assert!(peng_shi_condition(&Matrix::scalar(-2.0), &Matrix::scalar(1.0)));
    }

    #[test]
    fn deterministic_examples() {
        let y = solve_deterministic(&spec(-1.0, 0.0, unit_exp())).unwrap();
        for t in [0.0, 0.7, 3.0] {
            assert!((y.y(t)[0] - (-t).exp() / 2.0).abs() < 1e-15);
        }
        let y = solve_deterministic(&spec(-2.0, 1.0, unit_exp())).unwrap();
        assert!((y.y(1.0)[0] - (-1.0f64).exp() / 3.0).abs() < 1e-15);
        let y = solve_deterministic(&spec(-1.0, 0.5, ExpPoly::zero(1))).unwrap();
        assert_eq!(y.y(0.3), vec![0.0]);
        assert_eq!(y.z(0.3), vec![0.0]);
    }

    #[test]
    fn unstable_system_rejected() {
        let err = BSDESpec::deterministic(UncontrolledSystem::scalar(-1.0, 2.0), unit_exp());
        assert_eq!(err.unwrap_err(), Error::NotStable);
    }

    #[test]
    fn truncated_examples() {
        let s = spec(-1.0, 0.0, unit_exp());
        let y20 = solve_truncated(&s, 20.0, 20_000).unwrap();
        assert!((y20.y(0.0)[0] - 0.5).abs() < 1e-8);
        let y1 = solve_truncated(&s, 1.0, 1000).unwrap();
        assert!((y1.y(0.0)[0] - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-12);
        assert_eq!(y1.y(1.5), vec![0.0]);
        let z = solve_truncated(&spec(-1.0, 0.0, ExpPoly::zero(1)), 3.0, 10).unwrap();
        assert!(z.values.iter().all(|v| v[0] == 0.0));
    }

    #[test]
    fn duality_deterministic_paths() {
        let s = spec(-1.0, 0.0, unit_exp());
        let cfg = DualityConfig { paths: 4, horizon: 30.0, dt: 1e-3, seed: 1 };
        let e = duality_estimate_y0(&s, &[1.0], &cfg).unwrap();
        assert!((e.mean - 0.5).abs() < 1e-3 && e.std_error < 1e-12);
        let z = spec(-1.0, 0.5, ExpPoly::zero(1));
        assert_eq!(duality_estimate_y0(&z, &[1.0], &cfg).unwrap().mean, 0.0);
    }

    #[test]
    fn pathwise_driver_matches_deterministic_when_noise_free() {
        let sys = UncontrolledSystem::scalar(-1.0, 0.0);
        let f: PathwiseDriver<f64> = Arc::new(|t, _w| vec![(-t).exp()]);
        let s = BSDESpec::new(sys, Driver::Pathwise(f)).unwrap();
        let cfg = DualityConfig { paths: 2, horizon: 20.0, dt: 1e-3, seed: 0 };
        assert!((duality_estimate_y0(&s, &[1.0], &cfg).unwrap().mean - 0.5).abs() < 1e-3);
        assert!(solve_deterministic(&s).is_err());
    }

    #[test]
    fn apriori_ratio_within_bound() {
        let phi = ExpPoly::new(
            1,
            vec![
                ExpTerm::new(vec![1.0], 0, 0.5).unwrap(),
                ExpTerm::new(vec![-2.0], 1, 1.5).unwrap(),
            ],
        )
        .unwrap();
        let s = spec(-0.7, 0.3, phi);
        let r = apriori_ratio(&s).unwrap();
        assert!(r > 0.0 && r <= apriori_bound(&s.system().a).unwrap());
    }
}
