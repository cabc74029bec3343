//! Derivative-free minimization used by the stabilizer searches.

use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions<T> {
    pub initial_step: T,
    pub max_evals: usize,
    /// Stop once the simplex spread in `f` drops below this.
    pub f_tol: T,
}

impl<T: Real> Default for NelderMeadOptions<T> {
    fn default() -> Self {
        Self {
            initial_step: T::lit(0.5),
            max_evals: 2000,
            f_tol: T::lit(1e-10),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub evals: usize,
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction ½,
/// shrink ½). Non-finite objective values are treated as `+∞`.
pub fn nelder_mead<T: Real>(
    f: impl Fn(&[T]) -> T,
    x0: &[T],
    opts: NelderMeadOptions<T>,
) -> Minimum<T> {
    let dim = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[T]| {
        evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            T::infinity()
        }
    };
    if dim == 0 {
        let value = eval(x0);
        return Minimum { x: Vec::new(), value, evals: 1 };
    }

    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += opts.initial_step;
        let v = eval(&x);
        simplex.push((x, v));
    }

    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut iters = 0usize;
    loop {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        iters += 1;
        if iters * (dim + 2) >= opts.max_evals
            || (worst.is_finite() && (worst - best).abs() <= opts.f_tol)
        {
            break;
        }

        let mut centroid = vec![T::zero(); dim];
        for (x, _) in simplex.iter().take(dim) {
            for (c, &xi) in centroid.iter_mut().zip(x) {
                *c += xi;
            }
        }
        let inv = T::one() / T::lit(dim as f64);
        centroid.iter_mut().for_each(|c| *c *= inv);

        let along = |s: T| -> Vec<T> {
            centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(&c, &w)| c + s * (c - w))
                .collect()
        };

        let xr = along(T::one());
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(two);
            let fe = eval(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[dim].1 {
                let xc = along(half);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-half);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < simplex[dim].1.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for (xi, &bi) in x.iter_mut().zip(&x_best) {
                        *xi = bi + half * (*xi - bi);
                    }
                    *v = eval(x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, evals }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions { max_evals: 20_000, f_tol: 1e-16, ..Default::default() };
        let m = nelder_mead(f, &[-1.2, 1.0], opts);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{m:?}");
    }

    #[test]
    fn survives_infinite_regions() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 2.0).powi(2) };
        let m = nelder_mead(f, &[0.5], NelderMeadOptions::default());
        assert!((m.x[0] - 2.0).abs() < 1e-4);
    }
}
