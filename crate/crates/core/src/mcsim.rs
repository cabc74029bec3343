//! Euler–Maruyama simulation of the closed-loop state equation
//!
//! ```text
//! dX = [AX + Bu + b]dt + [CX + Du + σ]dW,   u = ΘX + v(t),
//! ```
//!
//! Monte-Carlo estimation of the cost
//! `E∫₀^T ⟨QX,X⟩ + 2⟨SX,u⟩ + ⟨Ru,u⟩ + 2⟨q,X⟩ + 2⟨ρ,u⟩ dt`, and
//! independent checks of a synthesized saddle point.
//!
//! Path `i` draws its increments from its own counter-based stream keyed
//! by `(seed, i)`, and all reductions run in path order, so results are
//! bit-identical for any number of worker threads. Running the same seed
//! under different controls gives common random numbers.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exppoly::ExpPoly;
use crate::matcore::{Matrix, SymMatrix};
use crate::riccati::{mln, GameSpec};
use crate::saddle::SaddleSolution;
use crate::scalar::Real;
use crate::stats::{pairwise_sum, path_rng, Estimate};

/// States beyond this magnitude abort the simulation.
pub const DIVERGENCE_CUTOFF: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T> {
    pub dt: T,
    pub horizon: T,
    pub paths: usize,
    pub seed: u64,
    /// Pair path `2k+1` with the negated increments of path `2k`.
    pub antithetic: bool,
    /// Upper bound on the number of stored time points per path; the cost
    /// is always integrated on the full grid.
    pub record_points: usize,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(1e-3),
            horizon: T::lit(40.0),
            paths: 4000,
            seed: 0,
            antithetic: false,
            record_points: 1000,
        }
    }
}

impl<T: Real> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !(self.dt <= self.horizon) || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need 0 < dt <= horizon, got dt = {}, horizon = {}",
                self.dt, self.horizon
            )));
        }
        if self.paths < 2 {
            return Err(Error::InvalidArgument("need at least 2 paths".into()));
        }
        if self.antithetic && !self.paths.is_multiple_of(2) {
            return Err(Error::InvalidArgument("antithetic sampling needs an even path count".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round().to_usize().unwrap_or(0).max(1)
    }

    fn stride(&self) -> usize {
        let steps = self.steps();
        let pts = self.record_points.max(2) - 1;
        steps.div_ceil(pts).max(1)
    }
}

#[derive(Debug, Clone)]
pub struct PathEnsemble<T> {
    /// Recorded times (every `stride`-th grid point, plus the horizon).
    pub times: Vec<T>,
    /// `paths × times × n`, row-major.
    pub states: Vec<T>,
    pub per_path_cost: Vec<T>,
    /// Bound on `|E∫_T^∞ (integrand) dt|` from the fitted decay of `E|X|²`.
    pub truncation_tail_bound: T,
    /// Fitted exponential decay rate of `E|X(t)|²` over the last quarter of
    /// the horizon; `None` if the second moment vanishes there.
    pub decay_rate: Option<T>,
    pub n: usize,
    pub paths: usize,
    pub config: SimConfig<T>,
    theta: Matrix<T>,
    feedforward: ExpPoly<T>,
    x0: Vec<T>,
}

impl<T: Real> PathEnsemble<T> {
    pub fn state(&self, path: usize, k: usize) -> &[T] {
        let off = (path * self.times.len() + k) * self.n;
        &self.states[off..off + self.n]
    }

    /// `E|X(tₖ)|²` with its standard error.
    pub fn second_moment_estimate(&self, k: usize) -> Estimate<T> {
        let xs: Vec<T> = (0..self.paths)
            .map(|p| self.state(p, k).iter().map(|&v| v * v).sum())
            .collect();
        self.estimate(&xs)
    }

    /// `E|X(t)|²` at every recorded time.
    pub fn second_moment(&self) -> Vec<T> {
        (0..self.times.len())
            .map(|k| self.second_moment_estimate(k).mean)
            .collect()
    }

    /// Index of the recorded time nearest to `t`.
    pub fn time_index(&self, t: T) -> usize {
        let mut best = 0;
        for (i, &s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }

    /// Sample statistics of per-path quantities, averaging antithetic pairs
    /// first.
    pub fn estimate(&self, xs: &[T]) -> Estimate<T> {
        if self.config.antithetic {
            let pairs: Vec<T> = xs
                .chunks(2)
                .map(|c| (c[0] + c[1]) * T::lit(0.5))
                .collect();
            Estimate::from_samples(&pairs)
        } else {
            Estimate::from_samples(xs)
        }
    }

    pub fn theta(&self) -> &Matrix<T> {
        &self.theta
    }

    pub fn feedforward(&self) -> &ExpPoly<T> {
        &self.feedforward
    }

    pub fn x0(&self) -> &[T] {
        &self.x0
    }
}

/// Closed-loop coefficients on the simulation grid. With `u = ΘX + v`,
/// the integrand is `⟨WX, X⟩ + 2⟨ℓ(t), X⟩ + c(t)`.
struct ClosedLoop<T> {
    n: usize,
    a_cl: Matrix<T>,
    c_cl: Matrix<T>,
    w: Matrix<T>,
    drift: Vec<T>,
    diffusion: Vec<T>,
    ell: Vec<T>,
    c0: Vec<T>,
}

impl<T: Real> ClosedLoop<T> {
    fn new(spec: &GameSpec<T>, theta: &Matrix<T>, ff: &ExpPoly<T>, grid: &[T]) -> Self {
        let n = spec.state_dim();
        let (b, d, s, r) = (spec.b(), spec.d(), spec.s(), spec.r().as_matrix());
        let f = spec.forcing();
        let rho = f.rho();
        let a_cl = spec.a() + &(b * theta);
        let c_cl = spec.c() + &(d * theta);
        let st = s.transpose();
        let tt = theta.transpose();
        let w = SymMatrix::symmetrize(
            &(&(spec.q().as_matrix() + &(&st * theta)) + &(&tt * s)) + &(&(&tt * r) * theta),
        )
        .into_matrix();
        let ell_v = &st + &(&tt * r);
        let k = grid.len();
        let mut drift = vec![T::zero(); k * n];
        let mut diffusion = vec![T::zero(); k * n];
        let mut ell = vec![T::zero(); k * n];
        let mut c0 = vec![T::zero(); k];
        for (i, &t) in grid.iter().enumerate() {
            let v = ff.eval(t);
            let rh = rho.eval(t);
            let bv = b.mul_vec(&v);
            let dv = d.mul_vec(&v);
            let bt = f.b.eval(t);
            let sg = f.sigma.eval(t);
            let qt = f.q.eval(t);
            let lv = ell_v.mul_vec(&v);
            let tr = tt.mul_vec(&rh);
            for j in 0..n {
                drift[i * n + j] = bv[j] + bt[j];
                diffusion[i * n + j] = dv[j] + sg[j];
                ell[i * n + j] = lv[j] + qt[j] + tr[j];
            }
            let rv = r.mul_vec(&v);
            c0[i] = v.iter().zip(&rv).map(|(&a, &b)| a * b).sum::<T>()
                + T::lit(2.0) * rh.iter().zip(&v).map(|(&a, &b)| a * b).sum::<T>();
        }
        Self {
            n,
            a_cl,
            c_cl,
            w,
            drift,
            diffusion,
            ell,
            c0,
        }
    }

    #[inline]
    fn integrand(&self, i: usize, x: &[T]) -> T {
        let n = self.n;
        let mut acc = self.c0[i];
        for j in 0..n {
            let mut wx = T::zero();
            for k in 0..n {
                wx += self.w[(j, k)] * x[k];
            }
            acc += x[j] * (wx + T::lit(2.0) * self.ell[i * n + j]);
        }
        acc
    }
}

fn check_inputs<T: Real>(spec: &GameSpec<T>, theta: &Matrix<T>, ff: &ExpPoly<T>, x: &[T]) -> Result<()> {
    let (n, m) = (spec.state_dim(), spec.control_dim());
    if theta.shape() != (m, n) {
        return Err(Error::Dimension(format!("Θ is {:?}, expected {m}x{n}", theta.shape())));
    }
    if ff.dim() != m {
        return Err(Error::Dimension(format!("feedforward has dimension {}, expected {m}", ff.dim())));
    }
    if x.len() != n {
        return Err(Error::Dimension(format!("x has {} entries, expected {n}", x.len())));
    }
    Ok(())
}

/// Simulates the closed loop `u = ΘX + v(t)` from `X(0) = x`.
pub fn simulate<T: Real>(
    spec: &GameSpec<T>,
    theta: &Matrix<T>,
    feedforward: &ExpPoly<T>,
    x: &[T],
    cfg: &SimConfig<T>,
) -> Result<PathEnsemble<T>> {
    cfg.validate()?;
    check_inputs(spec, theta, feedforward, x)?;
    let n = spec.state_dim();
    let steps = cfg.steps();
    let dt = cfg.dt;
    let grid: Vec<T> = (0..=steps).map(|i| dt * T::lit(i as f64)).collect();
    let stride = cfg.stride();
    let recorded: Vec<usize> = (0..=steps)
        .filter(|&i| i % stride == 0 || i == steps)
        .collect();
    let times: Vec<T> = recorded.iter().map(|&i| grid[i]).collect();
    let cl = ClosedLoop::new(spec, theta, feedforward, &grid);
    let sqdt = dt.sqrt();
    let half = T::lit(0.5);
    let cutoff = T::lit(DIVERGENCE_CUTOFF);

    let run = |path: usize| -> Result<(Vec<T>, T)> {
        let (stream, sign) = if cfg.antithetic {
            (path / 2, if path.is_multiple_of(2) { T::one() } else { -T::one() })
        } else {
            (path, T::one())
        };
        let mut rng = path_rng(cfg.seed, stream);
        let mut xs = x.to_vec();
        let mut next = vec![T::zero(); n];
        let mut rec = Vec::with_capacity(times.len() * n);
        rec.extend_from_slice(&xs);
        let mut g_prev = cl.integrand(0, &xs);
        let mut cost = T::zero();
        for i in 0..steps {
            let dw = sign * sqdt * T::sample_normal(&mut rng);
            for j in 0..n {
                let mut ax = cl.drift[i * n + j];
                let mut cx = cl.diffusion[i * n + j];
                for k in 0..n {
                    ax += cl.a_cl[(j, k)] * xs[k];
                    cx += cl.c_cl[(j, k)] * xs[k];
                }
                next[j] = xs[j] + ax * dt + cx * dw;
            }
            std::mem::swap(&mut xs, &mut next);
            if xs.iter().any(|v| !(v.abs() <= cutoff)) {
                return Err(Error::Diverged {
                    path,
                    time: grid[i + 1].as_f64(),
                });
            }
            let g = cl.integrand(i + 1, &xs);
            cost += half * dt * (g_prev + g);
            g_prev = g;
            if (i + 1) % stride == 0 || i + 1 == steps {
                rec.extend_from_slice(&xs);
            }
        }
        Ok((rec, cost))
    };

    let results: Vec<Result<(Vec<T>, T)>> = (0..cfg.paths).into_par_iter().map(run).collect();
    let mut states = Vec::with_capacity(cfg.paths * times.len() * n);
    let mut per_path_cost = Vec::with_capacity(cfg.paths);
    for r in results {
        let (rec, cost) = r?;
        states.extend_from_slice(&rec);
        per_path_cost.push(cost);
    }
    let mut ens = PathEnsemble {
        times,
        states,
        per_path_cost,
        truncation_tail_bound: T::zero(),
        decay_rate: None,
        n,
        paths: cfg.paths,
        config: *cfg,
        theta: theta.clone(),
        feedforward: feedforward.clone(),
        x0: x.to_vec(),
    };
    let (rate, tail) = tail_bound(spec, &ens, &cl, feedforward);
    ens.decay_rate = rate;
    ens.truncation_tail_bound = tail;
    Ok(ens)
}

/// Least-squares fit of `ln E|X|²` over the last quarter of the horizon.
/// Returns `(rate, tail bound)`; the bound is infinite when the moment
/// does not decay.
fn tail_bound<T: Real>(spec: &GameSpec<T>, ens: &PathEnsemble<T>, cl: &ClosedLoop<T>, ff: &ExpPoly<T>) -> (Option<T>, T) {
    let horizon = *ens.times.last().unwrap();
    let start = horizon * T::lit(0.75);
    let m2 = ens.second_moment();
    let pts: Vec<(T, T)> = ens
        .times
        .iter()
        .zip(&m2)
        .filter(|(&t, _)| t >= start)
        .map(|(&t, &m)| (t, m))
        .collect();
    let m_end = *m2.last().unwrap();

    // Forcing contributions beyond the horizon: ∫_T^∞ |ℓ|² and ∫_T^∞ |c|
    // on a fine grid out to 50 decay lengths.
    let f = spec.forcing();
    let slow = [f.min_rate(), ff.min_rate()].into_iter().flatten().reduce(T::min);
    let (ell2, c_abs) = match slow {
        None => (T::zero(), T::zero()),
        Some(rate) => {
            let span = T::lit(50.0) / rate;
            let k = 4000;
            let h = span / T::lit(k as f64);
            let grid: Vec<T> = (0..=k).map(|i| horizon + h * T::lit(i as f64)).collect();
            let tail = ClosedLoop::new(spec, &ens.theta, ff, &grid);
            let n = cl.n;
            let l2: Vec<T> = (0..=k)
                .map(|i| (0..n).map(|j| tail.ell[i * n + j] * tail.ell[i * n + j]).sum())
                .collect();
            let trap = |v: &[T]| -> T {
                let s = pairwise_sum(v) - (v[0] + v[k]) * T::lit(0.5);
                s * h
            };
            let cabs: Vec<T> = tail.c0.iter().map(|c| c.abs()).collect();
            (trap(&l2), trap(&cabs))
        }
    };

    if pts.iter().all(|&(_, m)| m == T::zero()) {
        return (None, c_abs);
    }
    if pts.len() < 2 || pts.iter().any(|&(_, m)| !(m > T::zero())) {
        return (None, T::infinity());
    }
    let k = T::lit(pts.len() as f64);
    let mt = pts.iter().map(|p| p.0).sum::<T>() / k;
    let my = pts.iter().map(|p| p.1.ln()).sum::<T>() / k;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for &(t, m) in &pts {
        sxy += (t - mt) * (m.ln() - my);
        sxx += (t - mt) * (t - mt);
    }
    let rate = -sxy / sxx;
    if !(rate > T::zero()) {
        return (Some(rate), T::infinity());
    }
    let w_norm = SymMatrix::symmetrize(cl.w.clone())
        .eigenvalues()
        .iter()
        .fold(T::zero(), |a, x| a.max(x.abs()));
    let x_tail = m_end / rate;
    let bound = w_norm * x_tail + T::lit(2.0) * (ell2 * x_tail).sqrt() + c_abs;
    (Some(rate), bound)
}

/// Cost estimate from an ensemble simulated under `(Θ, v)`.
pub fn estimate_cost<T: Real>(
    spec: &GameSpec<T>,
    ens: &PathEnsemble<T>,
    theta: &Matrix<T>,
    feedforward: &ExpPoly<T>,
) -> Result<Estimate<T>> {
    check_inputs(spec, theta, feedforward, &ens.x0)?;
    if ens.theta != *theta || ens.feedforward != *feedforward {
        return Err(Error::InvalidArgument(
            "ensemble was simulated under a different control".into(),
        ));
    }
    Ok(ens.estimate(&ens.per_path_cost))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    /// The minimizer.
    One,
    /// The maximizer.
    Two,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Deviation<T> {
    /// `ΔΘᵢ` (`mᵢ×n`) added to the player's gain.
    Gain(Matrix<T>),
    /// `Δuᵢ` (`mᵢ`-dimensional) added to the player's feedforward.
    Feedforward(ExpPoly<T>),
}

/// A unilateral deviation of one player from the saddle point.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation<T> {
    pub player: Player,
    pub deviation: Deviation<T>,
}

impl<T: Real> Perturbation<T> {
    pub fn gain(player: Player, delta: Matrix<T>) -> Self {
        Self {
            player,
            deviation: Deviation::Gain(delta),
        }
    }

    pub fn feedforward(player: Player, delta: ExpPoly<T>) -> Self {
        Self {
            player,
            deviation: Deviation::Feedforward(delta),
        }
    }

    /// The perturbed `(Θ, v)`.
    fn apply(&self, sol: &SaddleSolution<T>) -> Result<(Matrix<T>, ExpPoly<T>)> {
        let (m, n) = sol.theta.shape();
        let (offset, rows) = match self.player {
            Player::One => (0, sol.m1),
            Player::Two => (sol.m1, m - sol.m1),
        };
        let mut theta = sol.theta.clone();
        let mut ff = sol.u_star.clone();
        match &self.deviation {
            Deviation::Gain(d) => {
                if d.shape() != (rows, n) {
                    return Err(Error::Dimension(format!(
                        "gain deviation is {:?}, expected {rows}x{n}",
                        d.shape()
                    )));
                }
                for i in 0..rows {
                    for j in 0..n {
                        theta[(offset + i, j)] += d[(i, j)];
                    }
                }
            }
            Deviation::Feedforward(d) => {
                if d.dim() != rows {
                    return Err(Error::Dimension(format!(
                        "feedforward deviation has dimension {}, expected {rows}",
                        d.dim()
                    )));
                }
                let embed = Matrix::from_fn(m, rows, |i, j| {
                    if i == offset + j {
                        T::one()
                    } else {
                        T::zero()
                    }
                });
                ff = ff.add(&d.apply(&embed));
            }
        }
        Ok((theta, ff))
    }
}

#[derive(Debug, Clone)]
pub struct ArmResult<T> {
    pub perturbation: Perturbation<T>,
    /// Cost of the perturbed arm under the common random numbers.
    pub cost: Estimate<T>,
    /// Paired differences `J(perturbed) − J*` per path.
    pub paired_diff: Estimate<T>,
    /// Standard error of the same difference from two independent seeds.
    pub independent_se: T,
    pub tail_bound: T,
    /// Player 1 deviations must not lower `J` and player 2 deviations must
    /// not raise it, beyond 3 paired standard errors.
    pub holds: bool,
}

#[derive(Debug, Clone)]
pub struct SaddleReport<T> {
    pub j_star: Estimate<T>,
    pub j_star_tail_bound: T,
    pub arms: Vec<ArmResult<T>>,
}

impl<T: Real> SaddleReport<T> {
    pub fn all_hold(&self) -> bool {
        self.arms.iter().all(|a| a.holds)
    }

    /// [`Error::SaddleViolation`] for the first failing arm.
    pub fn check(&self) -> Result<()> {
        for (i, a) in self.arms.iter().enumerate() {
            if !a.holds {
                let d = a.paired_diff;
                let excess = match a.perturbation.player {
                    Player::One => -d.mean - T::lit(3.0) * d.std_error,
                    Player::Two => d.mean - T::lit(3.0) * d.std_error,
                };
                return Err(Error::SaddleViolation {
                    arm: i,
                    excess: excess.as_f64(),
                });
            }
        }
        Ok(())
    }
}

/// Seed offset for the independent-seed comparison arm.
const INDEPENDENT_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Monte-Carlo check of the two saddle inequalities against unilateral
/// deviations, with common random numbers across arms.
pub fn verify_saddle<T: Real>(
    spec: &GameSpec<T>,
    sol: &SaddleSolution<T>,
    perturbations: &[Perturbation<T>],
    x: &[T],
    cfg: &SimConfig<T>,
) -> Result<SaddleReport<T>> {
    let base = simulate(spec, &sol.theta, &sol.u_star, x, cfg)?;
    let j_star = base.estimate(&base.per_path_cost);
    let three = T::lit(3.0);
    let mut arms = Vec::with_capacity(perturbations.len());
    for pert in perturbations {
        let (theta, ff) = pert.apply(sol)?;
        let ens = simulate(spec, &theta, &ff, x, cfg)?;
        let diffs: Vec<T> = ens
            .per_path_cost
            .iter()
            .zip(&base.per_path_cost)
            .map(|(&a, &b)| a - b)
            .collect();
        let paired = base.estimate(&diffs);
        let indep_cfg = SimConfig {
            seed: cfg.seed.wrapping_add(INDEPENDENT_SEED_OFFSET),
            ..*cfg
        };
        let indep = simulate(spec, &theta, &ff, x, &indep_cfg)?;
        let indep_est = indep.estimate(&indep.per_path_cost);
        let independent_se = (indep_est.std_error * indep_est.std_error + j_star.std_error * j_star.std_error).sqrt();
        let holds = match pert.player {
            Player::One => paired.mean >= -three * paired.std_error,
            Player::Two => paired.mean <= three * paired.std_error,
        };
        arms.push(ArmResult {
            perturbation: pert.clone(),
            cost: ens.estimate(&ens.per_path_cost),
            paired_diff: paired,
            independent_se,
            tail_bound: ens.truncation_tail_bound,
            holds,
        });
    }
    Ok(SaddleReport {
        j_star,
        j_star_tail_bound: base.truncation_tail_bound,
        arms,
    })
}

#[derive(Debug, Clone)]
pub struct StationarityReport<T> {
    /// `max_t |E r(t)|` over the recorded grid.
    pub max_residual: T,
    /// Largest per-component standard error seen on the grid.
    pub max_std_error: T,
    /// `10·dt + 3·max_std_error`.
    pub tolerance: T,
    pub pass: bool,
}

/// Pathwise stationarity residual
/// `r = R u + BᵀY + DᵀZ + S X + ρ` along the optimal closed loop, with
/// `u = Θ*X + u*`, `Y = PX + η` and `Z = P(C + DΘ*)X + PDu* + Pσ + ζ`.
pub fn verify_stationarity<T: Real>(
    spec: &GameSpec<T>,
    sol: &SaddleSolution<T>,
    x: &[T],
    cfg: &SimConfig<T>,
) -> Result<StationarityReport<T>> {
    let ens = simulate(spec, &sol.theta, &sol.u_star, x, cfg)?;
    let (r, b, d, s) = (spec.r().as_matrix(), spec.b(), spec.d(), spec.s());
    let pm = sol.p.as_matrix();
    let f = spec.forcing();
    let rho = f.rho();
    let bt = b.transpose();
    let pcl = pm * &(spec.c() + &(d * &sol.theta));
    let pd = pm * d;
    let m = spec.control_dim();
    let mut max_residual = T::zero();
    let mut max_se = T::zero();
    let mut samples = vec![T::zero(); ens.paths];
    for (k, &t) in ens.times.iter().enumerate() {
        let us = sol.u_star.eval(t);
        let eta = sol.eta.eval(t);
        let zeta = sol.zeta.eval(t);
        let sg = f.sigma.eval(t);
        let rh = rho.eval(t);
        let pdu = pd.mul_vec(&us);
        let psg = pm.mul_vec(&sg);
        let residuals: Vec<Vec<T>> = (0..ens.paths)
            .map(|p| {
                let xs = ens.state(p, k);
                let u: Vec<T> = sol.theta.mul_vec(xs).iter().zip(&us).map(|(&a, &b)| a + b).collect();
                let y: Vec<T> = pm.mul_vec(xs).iter().zip(&eta).map(|(&a, &b)| a + b).collect();
                let pcx = pcl.mul_vec(xs);
                let z: Vec<T> = (0..spec.state_dim())
                    .map(|j| pcx[j] + pdu[j] + psg[j] + zeta[j])
                    .collect();
                let ru = r.mul_vec(&u);
                let by = bt.mul_vec(&y);
                let dz = d.tr_mul_vec(&z);
                let sx = s.mul_vec(xs);
                (0..m).map(|i| ru[i] + by[i] + dz[i] + sx[i] + rh[i]).collect()
            })
            .collect();
        let mut norm2 = T::zero();
        for i in 0..m {
            for (p, res) in residuals.iter().enumerate() {
                samples[p] = res[i];
            }
            let e = ens.estimate(&samples);
            norm2 += e.mean * e.mean;
            max_se = max_se.max(e.std_error);
        }
        max_residual = max_residual.max(norm2.sqrt());
    }
    let tolerance = T::lit(10.0) * cfg.dt + T::lit(3.0) * max_se;
    Ok(StationarityReport {
        max_residual,
        max_std_error: max_se,
        tolerance,
        pass: max_residual <= tolerance,
    })
}

/// Second moment `E[XXᵀ]` of `dX = A X dt + C X dW`, `X(0) = x`, at the
/// given times (ascending, starting at or after 0), by RK4 on
/// `M′ = AM + MAᵀ + CMCᵀ` with steps no longer than `1e-3` (shorter for
/// large coefficients).
pub fn moment_ode_reference<T: Real>(a_cl: &Matrix<T>, c_cl: &Matrix<T>, x: &[T], grid: &[T]) -> Vec<SymMatrix<T>> {
    let n = a_cl.rows();
    assert!(a_cl.is_square() && c_cl.shape() == a_cl.shape() && x.len() == n);
    let col = Matrix::column(x);
    let mut mcur = &col * &col.transpose();
    let rhs = |m: &Matrix<T>| -> Matrix<T> {
        &(&(a_cl * m) + &(m * &a_cl.transpose())) + &(&(c_cl * m) * &c_cl.transpose())
    };
    let scale = a_cl.max_abs() * T::lit(n as f64) + c_cl.max_abs() * c_cl.max_abs() * T::lit((n * n) as f64);
    let hmax = T::lit(1e-3).min(T::lit(0.1) / scale.max(T::lit(1e-12)));
    let mut t = T::zero();
    let mut out = Vec::with_capacity(grid.len());
    let two = T::lit(2.0);
    let sixth = T::one() / T::lit(6.0);
    for &target in grid {
        let span = target - t;
        if span > T::zero() {
            let k = (span / hmax).ceil().to_usize().unwrap_or(1).max(1);
            let h = span / T::lit(k as f64);
            for _ in 0..k {
                let k1 = rhs(&mcur);
                let k2 = rhs(&(&mcur + &k1.scale(h / two)));
                let k3 = rhs(&(&mcur + &k2.scale(h / two)));
                let k4 = rhs(&(&mcur + &k3.scale(h)));
                let incr = &(&k1 + &k2.scale(two)) + &(&k3.scale(two) + &k4);
                mcur = &mcur + &incr.scale(h * sixth);
            }
            t = target;
        }
        out.push(SymMatrix::symmetrize(mcur.clone()));
    }
    out
}

/// Exact cost of a homogeneous closed loop from `x`, `∫₀^∞ tr(W E[XXᵀ]) dt`,
/// through the Lyapunov equation `P A_cl + A_clᵀ P + C_clᵀ P C_cl + W = 0`.
pub fn homogeneous_cost<T: Real>(spec: &GameSpec<T>, theta: &Matrix<T>, x: &[T]) -> Result<T> {
    let v = mln(spec, &SymMatrix::zeros(spec.state_dim()));
    let cl = spec.controlled().closed_loop(theta);
    let tt = theta.transpose();
    let w = SymMatrix::symmetrize(
        &(&(v.m.as_matrix() + &(&v.l * theta)) + &(&tt * &v.l.transpose())) + &(&(&tt * v.n.as_matrix()) * theta),
    );
    let p = crate::stability::solve_lyapunov(&cl, &w)?;
    if !crate::stability::is_l2_stable(&cl)?.stable {
        return Err(Error::NotStable);
    }
    Ok(p.quad(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::fixtures::*;
    use crate::saddle::{synthesize, SaddleOptions};

    fn small_cfg(paths: usize, horizon: f64, dt: f64) -> SimConfig<f64> {
        SimConfig {
            dt,
            horizon,
            paths,
            seed: 11,
            antithetic: false,
            record_points: 200,
        }
    }

    #[test]
    fn config_validation() {
        assert!(small_cfg(1, 1.0, 0.1).validate().is_err());
        assert!(small_cfg(4, 1.0, 2.0).validate().is_err());
        let mut c = small_cfg(3, 1.0, 0.1);
        c.antithetic = true;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_initial_state_stays_zero() {
        let spec = singular();
        let ens = simulate(&spec, &Matrix::scalar(1.0), &ExpPoly::zero(1), &[0.0], &small_cfg(8, 2.0, 1e-2)).unwrap();
        assert!(ens.states.iter().all(|&v| v == 0.0));
        let e = estimate_cost(&spec, &ens, &Matrix::scalar(1.0), &ExpPoly::zero(1)).unwrap();
        assert_eq!((e.mean, e.std_error), (0.0, 0.0));
        assert_eq!(ens.truncation_tail_bound, 0.0);
    }

    #[test]
    fn unstable_loop_diverges() {
        // dX = 20 X dt: |X| passes 1e12 near t = 1.4.
        let spec = GameSpec::scalar_one_player(20.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0);
        let r = simulate(&spec, &Matrix::scalar(0.0), &ExpPoly::zero(1), &[1.0], &small_cfg(4, 2.0, 1e-3));
        assert!(matches!(r, Err(Error::Diverged { .. })));
    }

    #[test]
    fn boundary_gain_does_not_decay() {
        // Θ = −2 in the nonstabilizing game: A + BΘ = 0 and C + DΘ = 0.
        let spec = nonstabilizing();
        let ens = simulate(&spec, &Matrix::scalar(-2.0), &ExpPoly::zero(1), &[1.0], &small_cfg(16, 10.0, 1e-2)).unwrap();
        let m = ens.second_moment();
        assert!(m.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(ens.truncation_tail_bound.is_infinite());
    }

    #[test]
    fn deterministic_two_player_cost() {
        let spec = two_player_scalar();
        let sol = synthesize(&spec, &SaddleOptions::default()).unwrap();
        let ens = simulate(&spec, &sol.theta, &sol.u_star, &[1.0], &small_cfg(2, 20.0, 1e-3)).unwrap();
        let e = estimate_cost(&spec, &ens, &sol.theta, &sol.u_star).unwrap();
        assert!((e.mean - 0.5).abs() < 1e-3, "{e:?}");
        assert!(estimate_cost(&spec, &ens, &Matrix::zeros(2, 1), &sol.u_star).is_err());
    }

    #[test]
    fn moment_reference_examples() {
        let g = [0.0, 0.5, 1.0, 4.0];
        let m = moment_ode_reference(&Matrix::scalar(-1.0), &Matrix::scalar(0.0), &[1.0], &g);
        for (mm, &t) in m.iter().zip(&g) {
            assert!((mm[(0, 0)] - (-2.0_f64 * t).exp()).abs() < 1e-10);
        }
        let m = moment_ode_reference(&Matrix::scalar(-2.25), &Matrix::scalar(2.0), &[1.0], &g);
        for (mm, &t) in m.iter().zip(&g) {
            assert!((mm[(0, 0)] - (-0.5_f64 * t).exp()).abs() < 1e-10);
        }
        let m = moment_ode_reference(&Matrix::scalar(0.0), &Matrix::scalar(0.0), &[3.0], &g);
        assert!(m.iter().all(|mm| mm[(0, 0)] == 9.0));
    }

    #[test]
    fn homogeneous_cost_oracle() {
        let c = homogeneous_cost(&singular(), &Matrix::scalar(1.0), &[1.0]).unwrap();
        assert!((c + 1.0).abs() < 1e-12);
        let c = homogeneous_cost(&two_player_scalar(), &Matrix::from_rows(&[[-0.5], [0.8]]), &[1.0]).unwrap();
        assert!((c - (1.25 - 0.64) / (3.0 - 1.6)).abs() < 1e-12);
    }

    #[test]
    fn antithetic_pairs_share_noise() {
        // Additive noise only: the state is affine in the increments, so
        // each antithetic pair averages to the noise-free Euler path.
        let mut f = crate::riccati::ForcingTerms::zero(1, 1, 0);
        f.sigma = ExpPoly::exponential(vec![1.0], 1.0).unwrap();
        let spec = GameSpec::scalar_one_player(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0)
            .with_forcing(f)
            .unwrap();
        let mut cfg = small_cfg(4, 1.0, 1e-2);
        cfg.antithetic = true;
        let ens = simulate(&spec, &Matrix::scalar(0.0), &ExpPoly::zero(1), &[1.0], &cfg).unwrap();
        let k = ens.times.len() - 1;
        let (a, b) = (ens.state(0, k)[0], ens.state(1, k)[0]);
        assert!(a != b);
        assert!(((a + b) / 2.0 - 0.99f64.powi(100)).abs() < 1e-12);
    }
}
