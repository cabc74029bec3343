use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::poly::{Poly, PolyMatrix};
use super::{are_residual, mln, GameSpec};
use crate::error::{Error, Result};
use crate::matcore::{svd, vec_lyapunov_matrix, Lu, Matrix, SymMatrix};
use crate::scalar::Real;
use crate::stability::solve_lyapunov;

/// Root-finding strategy for [`solve_are`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// `ScalarRoots` when `n = 1`, otherwise `GridNewton`.
    #[default]
    Auto,
    /// Exhaustive for `n = 1`: clears the pseudo-inverse into a polynomial
    /// and returns every real root, including points where `N(P)` is singular.
    ScalarRoots,
    /// Newton on the smooth branch from the standard seeds.
    Newton,
    /// Newton from the standard seeds, a scaled-identity grid and random
    /// symmetric seeds.
    GridNewton,
}

#[derive(Debug, Clone)]
pub struct SolveOptions<T> {
    pub strategy: Strategy,
    /// Acceptance threshold on `‖residual‖_max`, relative to
    /// [`MLN::residual_scale`](super::MLN::residual_scale).
    pub tol: T,
    /// Extra Newton seeds.
    pub seeds: Vec<SymMatrix<T>>,
    /// Random seeds added by `GridNewton`.
    pub random_seeds: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            strategy: Strategy::Auto,
            tol: T::lit(1e-10),
            seeds: Vec::new(),
            random_seeds: 16,
            seed: 0,
            max_iter: 100,
        }
    }
}

const DEDUP_TOL: f64 = 1e-6;

/// Returns the distinct solutions found with relative residual `≤ tol`,
/// deduplicated at `1e-6`. An empty list from a Newton strategy is not a
/// proof of nonexistence; `ScalarRoots` is exhaustive.
pub fn solve_are<T: Real>(spec: &GameSpec<T>, opts: &SolveOptions<T>) -> Result<Vec<SymMatrix<T>>> {
    if !(opts.tol > T::zero()) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let n = spec.state_dim();
    let strategy = match opts.strategy {
        Strategy::Auto if n == 1 => Strategy::ScalarRoots,
        Strategy::Auto => Strategy::GridNewton,
        s => s,
    };
    match strategy {
        Strategy::ScalarRoots => {
            if n != 1 {
                return Err(Error::InvalidArgument(format!(
                    "scalar-roots strategy needs n = 1, got n = {n}"
                )));
            }
            Ok(scalar_roots(spec, opts.tol))
        }
        Strategy::Newton => Ok(newton_solutions(spec, opts, false)),
        Strategy::GridNewton => Ok(newton_solutions(spec, opts, true)),
        Strategy::Auto => unreachable!(),
    }
}

/// `‖residual‖_max / residual_scale`.
fn residual_norm<T: Real>(spec: &GameSpec<T>, p: &SymMatrix<T>) -> T {
    let v = mln(spec, p);
    let r = v.residual().max_abs() / v.residual_scale();
    if r.is_finite() {
        r
    } else {
        T::infinity()
    }
}

/// Candidates, each with residual, sorted by `(residual, order)`; drops
/// anything within [`DEDUP_TOL`] of an earlier survivor.
fn dedup<T: Real>(mut found: Vec<(SymMatrix<T>, T, usize)>) -> Vec<(SymMatrix<T>, T)> {
    found.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.2.cmp(&b.2)));
    let mut out: Vec<(SymMatrix<T>, T)> = Vec::new();
    for (p, r, _) in found {
        let dup = out
            .iter()
            .any(|(q, _)| (p.as_matrix() - q.as_matrix()).max_abs() <= T::lit(DEDUP_TOL));
        if !dup {
            out.push((p, r));
        }
    }
    out
}

/// Every real root of the scalar (`n = 1`) equation.
///
/// With `n = 1`, `M`, `L` and `N` are affine in `P`: `N(P) = R + P·dᵀd`
/// where `d = D`. After projecting out the common kernel of `R` and `d`
/// (directions on which `N(P)` vanishes for every `P`), the residual on
/// the regular set is `num(P)/det N(P)` with
/// `num = M·det N − L·adj N·Lᵀ`. Candidates are the real roots of `num`,
/// of `num′` (tangencies) and of `det N` (singular points, where the
/// pseudo-inverse changes rank); each is checked against the true residual.
fn scalar_roots<T: Real>(spec: &GameSpec<T>, tol: T) -> Vec<SymMatrix<T>> {
    let m = spec.control_dim();
    let (a, c, q) = (spec.a()[(0, 0)], spec.c()[(0, 0)], spec.q()[(0, 0)]);
    let b = spec.b();
    let d = spec.d();
    let s = spec.s();
    let r = spec.r();
    let mp = Poly::linear(q, a + a + c * c);

    let basis = range_basis(r.as_matrix(), d);
    let k = basis.cols();
    let r_red = &(&basis.transpose() * r.as_matrix()) * &basis;
    let d_red = d * &basis;
    let dd = &d_red.transpose() * &d_red;
    let l_full: Vec<(T, T)> = (0..m)
        .map(|j| (s[(j, 0)], b[(0, j)] + c * d[(0, j)]))
        .collect();
    let l_red: Vec<Poly<T>> = (0..k)
        .map(|col| {
            let (c0, c1) = l_full.iter().enumerate().fold((T::zero(), T::zero()), |acc, (j, &(x, y))| {
                (acc.0 + x * basis[(j, col)], acc.1 + y * basis[(j, col)])
            });
            Poly::linear(c0, c1)
        })
        .collect();

    let mut candidates: Vec<T> = Vec::new();
    if k == 0 {
        candidates.extend(mp.real_roots(T::lit(1e-6)));
    } else {
        let nmat = PolyMatrix::affine(&r_red, &dd);
        let det = nmat.det();
        if det.trimmed(T::lit(1e-12)).is_zero() {
            return grid_scan(spec, tol);
        }
        let num = mp.mul(&det).sub(&nmat.adjugate().bilinear(&l_red, &l_red));
        let imag = T::lit(1e-6);
        candidates.extend(num.real_roots(imag));
        candidates.extend(num.derivative().real_roots(imag));
        candidates.extend(det.real_roots(imag));
    }

    let found: Vec<_> = candidates
        .into_iter()
        .filter(|x| x.is_finite())
        .enumerate()
        .filter_map(|(i, x)| {
            let p = SymMatrix::scalar(x);
            let res = residual_norm(spec, &p);
            (res <= tol).then_some((p, res, i))
        })
        .collect();
    let mut out: Vec<SymMatrix<T>> = dedup(found).into_iter().map(|(p, _)| p).collect();
    out.sort_by(|a, b| a[(0, 0)].partial_cmp(&b[(0, 0)]).unwrap());
    out
}

/// Orthonormal basis (`m×k`) of the orthogonal complement of
/// `ker R ∩ ker D`, through the SVD of `[R; D]`.
fn range_basis<T: Real>(r: &Matrix<T>, d: &Matrix<T>) -> Matrix<T> {
    let m = r.cols();
    if m == 0 {
        return Matrix::zeros(0, 0);
    }
    let stacked = r.vstack(d);
    let dec = svd(&stacked);
    let smax = dec.singular_values.iter().fold(T::zero(), |x, &s| x.max(s));
    let cutoff = T::lit(1e-12) * smax.max(T::one());
    let keep: Vec<usize> = (0..dec.singular_values.len())
        .filter(|&i| dec.singular_values[i] > cutoff)
        .collect();
    Matrix::from_fn(m, keep.len(), |i, j| dec.v[(i, keep[j])])
}

/// Fallback for the degenerate case where `N(P)` is singular for every
/// `P` even after removing the common kernel: sign changes of the residual
/// on a dense grid over `[−10³, 10³]`, refined by bisection.
fn grid_scan<T: Real>(spec: &GameSpec<T>, tol: T) -> Vec<SymMatrix<T>> {
    let f = |x: T| are_residual(spec, &SymMatrix::scalar(x))[(0, 0)];
    let pts = 10_001;
    let xs: Vec<T> = (0..pts)
        .map(|i| T::lit(-1e3 + 2e3 * i as f64 / (pts - 1) as f64))
        .collect();
    let mut found = Vec::new();
    for (i, w) in xs.windows(2).enumerate() {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (f(lo), f(hi));
        if flo.abs() <= tol {
            found.push((SymMatrix::scalar(lo), flo.abs(), i));
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = (lo + hi) * T::lit(0.5);
            if f(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = SymMatrix::scalar((lo + hi) * T::lit(0.5));
        let res = residual_norm(spec, &p);
        if res <= tol {
            found.push((p, res, i));
        }
    }
    dedup(found).into_iter().map(|(p, _)| p).collect()
}

/// Newton's method on the smooth branch. The Fréchet derivative of the
/// residual at `P` with `K = N†Lᵀ` is `H ↦ H A_K + A_KᵀH + C_KᵀH C_K`,
/// `A_K = A − BK`, `C_K = C − DK`; steps are damped by backtracking on
/// the residual max-norm.
fn newton<T: Real>(spec: &GameSpec<T>, p0: SymMatrix<T>, tol: T, max_iter: usize) -> Option<(SymMatrix<T>, T)> {
    let n = spec.state_dim();
    let mut p = p0;
    let mut v = mln(spec, &p);
    let mut f = v.residual();
    let mut r = f.max_abs();
    let target = tol * T::lit(1e-3);
    for _ in 0..max_iter {
        if !r.is_finite() {
            return None;
        }
        if r <= target {
            break;
        }
        let k = v.n_pinv.as_matrix() * &v.l.transpose();
        let ak = spec.a() - &(spec.b() * &k);
        let ck = spec.c() - &(spec.d() * &k);
        let lu = Lu::new(&vec_lyapunov_matrix(&ak, &ck), T::lit(1e-14)).ok()?;
        let rhs: Vec<T> = f.vec().iter().map(|&x| -x).collect();
        let h = SymMatrix::symmetrize(Matrix::unvec(&lu.solve(&rhs), n, n));
        let mut step = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let trial = SymMatrix::symmetrize(p.as_matrix() + &h.as_matrix().scale(step));
            let tv = mln(spec, &trial);
            let tf = tv.residual();
            let tr = tf.max_abs();
            if tr.is_finite() && tr < r * (T::one() - T::lit(1e-4) * step) {
                p = trial;
                v = tv;
                f = tf;
                r = tr;
                accepted = true;
                break;
            }
            step *= T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    let rel = r / v.residual_scale();
    (rel <= tol).then_some((p, rel))
}

fn newton_solutions<T: Real>(spec: &GameSpec<T>, opts: &SolveOptions<T>, grid: bool) -> Vec<SymMatrix<T>> {
    let n = spec.state_dim();
    let mut seeds = vec![
        SymMatrix::zeros(n),
        SymMatrix::identity(n),
        SymMatrix::identity(n).scale(-T::one()),
    ];
    if let Ok(p) = solve_lyapunov(&spec.uncontrolled(), spec.q()) {
        seeds.push(p);
    }
    seeds.extend(opts.seeds.iter().cloned());
    if grid {
        for s in [-10.0, -5.0, -2.0, -0.5, 0.5, 2.0, 5.0, 10.0] {
            seeds.push(SymMatrix::identity(n).scale(T::lit(s)));
        }
        for i in 0..opts.random_seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let g = Matrix::from_fn(n, n, |_, _| T::lit(2.0) * T::sample_normal(&mut rng));
            seeds.push(SymMatrix::symmetrize(&g + &g.transpose()));
        }
    }
    let found: Vec<_> = seeds
        .into_par_iter()
        .enumerate()
        .filter_map(|(i, s)| newton(spec, s, opts.tol, opts.max_iter).map(|(p, r)| (p, r, i)))
        .collect();
    dedup(found).into_iter().map(|(p, _)| p).collect()
}
