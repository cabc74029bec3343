use super::{mln, GameSpec, MLN};
use crate::matcore::{extended_schur_holds, is_nsd, is_psd, Matrix, SymMatrix};
use crate::scalar::Real;
use crate::stability::{is_l2_stable, search_stabilizer};

#[derive(Debug, Clone)]
pub struct ClassifyOptions<T> {
    /// Stabilizer-search restarts over `Π` when `I − N†N ≠ 0`.
    pub stab_budget: usize,
    pub seed: u64,
    /// Threshold on `‖residual‖_max` for `is_solution`, relative to
    /// [`MLN::residual_scale`](super::MLN::residual_scale).
    pub residual_tol: T,
    /// Threshold for the range condition, scaled by `1 + ‖L‖_max`.
    pub range_tol: T,
    /// Tolerance of the PSD/NSD sign tests.
    pub sign_tol: T,
}

impl<T: Real> Default for ClassifyOptions<T> {
    fn default() -> Self {
        Self {
            stab_budget: 32,
            seed: 0,
            residual_tol: T::lit(1e-8),
            range_tol: T::lit(1e-8),
            sign_tol: T::lit(1e-8),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AREClassification<T> {
    pub is_solution: bool,
    pub residual_norm: T,
    /// `L(I − NN†) = 0`.
    pub range_ok: bool,
    /// `R₁₁ + D₁ᵀPD₁ ⪰ 0` and `R₂₂ + D₂ᵀPD₂ ⪯ 0`.
    pub sign_ok: bool,
    pub stabilizing: bool,
    /// The `Π`-search failed with a nontrivial projector: no claim either way.
    pub inconclusive: bool,
    /// Rank of `I − N†N`.
    pub projector_rank: usize,
    /// `−N†Lᵀ`; the only candidate gain when `projector_rank == 0`.
    pub base_gain: Matrix<T>,
    /// Stabilizing `Θ = −N†Lᵀ + (I − N†N)Π`, present iff `stabilizing`.
    pub gain: Option<Matrix<T>>,
    pub pi: Option<Matrix<T>>,
    /// Closed-loop abscissa of `gain`, or of `base_gain` when no gain was found.
    pub closed_loop_abscissa: T,
}

/// `Θ = −N†Lᵀ + (I − N†N)Π`.
pub fn gain_from_pi<T: Real>(v: &MLN<T>, pi: &Matrix<T>) -> Matrix<T> {
    &v.base_gain() + &(&v.projector() * pi)
}

/// Orthonormal basis of the range of the projector `I − N†N`.
fn projector_basis<T: Real>(v: &MLN<T>) -> Matrix<T> {
    let proj = SymMatrix::symmetrize(v.projector());
    let e = proj.eigen();
    let keep: Vec<usize> = (0..e.values.len())
        .filter(|&i| e.values[i] > T::lit(0.5))
        .collect();
    Matrix::from_fn(proj.dim(), keep.len(), |i, j| e.vectors[(i, keep[j])])
}

/// Classifies `P` against the game ARE: residual, range and sign
/// conditions, and whether some `Π` makes `−N†Lᵀ + (I − N†N)Π` a
/// stabilizer. With a trivial projector the gain is unique and is tested
/// directly; otherwise `Π` is searched with seeded Nelder–Mead restarts.
pub fn classify<T: Real>(spec: &GameSpec<T>, p: &SymMatrix<T>, opts: &ClassifyOptions<T>) -> AREClassification<T> {
    let v = mln(spec, p);
    let residual_norm = v.residual().max_abs();
    let is_solution = residual_norm <= opts.residual_tol * v.residual_scale();

    let k = spec.control_dim();
    let leak = if k == 0 {
        T::zero()
    } else {
        (&v.l * &(&Matrix::identity(k) - &(v.n.as_matrix() * v.n_pinv.as_matrix()))).max_abs()
    };
    let range_ok = leak <= opts.range_tol * (T::one() + v.l.max_abs());

    let (m1, m2) = (spec.m1(), spec.m2());
    let n11 = SymMatrix::symmetrize(v.n.block(0, 0, m1, m1));
    let n22 = SymMatrix::symmetrize(v.n.block(m1, m1, m2, m2));
    let sign_ok = is_psd(&n11, opts.sign_tol) && is_nsd(&n22, opts.sign_tol);

    let basis = projector_basis(&v);
    let projector_rank = basis.cols();
    let base_gain = v.base_gain();
    let sys = spec.controlled();
    let base_abscissa = sys.closed_loop(&base_gain).abscissa();

    let mut out = AREClassification {
        is_solution,
        residual_norm,
        range_ok,
        sign_ok,
        stabilizing: false,
        inconclusive: false,
        projector_rank,
        base_gain: base_gain.clone(),
        gain: None,
        pi: None,
        closed_loop_abscissa: base_abscissa,
    };
    if !(is_solution && range_ok && sign_ok) {
        return out;
    }
    if projector_rank == 0 {
        let stable = is_l2_stable(&sys.closed_loop(&base_gain)).is_ok_and(|r| r.stable);
        if stable {
            out.stabilizing = true;
            out.gain = Some(base_gain);
            out.pi = Some(Matrix::zeros(k, spec.state_dim()));
        }
        return out;
    }
    match search_stabilizer(&sys, &base_gain, &basis, opts.stab_budget, opts.seed) {
        Some(found) => {
            let pi = &basis * &found.xi;
            let theta = gain_from_pi(&v, &pi);
            let stable = is_l2_stable(&sys.closed_loop(&theta)).is_ok_and(|r| r.stable);
            if stable {
                out.stabilizing = true;
                out.closed_loop_abscissa = found.abscissa;
                out.gain = Some(theta);
                out.pi = Some(pi);
            } else {
                out.inconclusive = true;
            }
        }
        None => out.inconclusive = true,
    }
    out
}

/// Positive semidefiniteness of `[[M(P), L(P)], [L(P)ᵀ, N(P)]]`.
pub fn in_script_p<T: Real>(spec: &GameSpec<T>, p: &SymMatrix<T>) -> bool {
    let v = mln(spec, p);
    extended_schur_holds(&v.m, &v.l, &v.n, T::lit(1e-8))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    fn p(x: f64) -> SymMatrix<f64> {
        SymMatrix::scalar(x)
    }

    #[test]
    fn nonstabilizing_is_not_stabilizing() {
        let c = classify(&nonstabilizing(), &p(1.0), &ClassifyOptions::default());
        assert!(c.is_solution && c.range_ok && c.sign_ok);
        assert!(!c.stabilizing && !c.inconclusive && c.gain.is_none());
        assert_eq!(c.projector_rank, 0);
        assert!((c.base_gain[(0, 0)] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_is_stabilizing() {
        let c = classify(&singular(), &p(-1.0), &ClassifyOptions::default());
        assert!(c.stabilizing && c.projector_rank == 1);
        let th = c.gain.unwrap()[(0, 0)];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(1.0 - h < th && th < 1.0 + h, "{th}");
        assert_eq!(c.pi.unwrap()[(0, 0)], th);
    }

    #[test]
    fn two_player_gain() {
        let c = classify(&two_player_scalar(), &p(0.5), &ClassifyOptions::default());
        assert!(c.stabilizing && c.projector_rank == 0);
        let g = c.gain.unwrap();
        assert!((g[(0, 0)] + 0.5).abs() < 1e-14 && (g[(1, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn non_solution_is_not_stabilizing() {
        let c = classify(&two_player_scalar(), &p(-3.0), &ClassifyOptions::default());
        assert!(!c.is_solution && !c.stabilizing);
    }

    #[test]
    fn script_p_membership() {
        assert!(in_script_p(&nonstabilizing(), &p(1.0)));
        assert!(!in_script_p(&nonstabilizing(), &p(2.0)));
        let spec = GameSpec::scalar_one_player(-1.0, 1.0, 0.3, 0.2, 1.0, 0.0, 2.0);
        assert!(in_script_p(&spec, &p(0.0)));
    }
}
