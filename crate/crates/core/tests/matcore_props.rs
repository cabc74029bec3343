mod common;

use proptest::prelude::*;
use zslq::matcore::{
    eigenvalues, extended_schur_holds, is_psd, pseudo_inverse, schur_conditions, svd, vec_lyapunov_matrix, Matrix,
    SymMatrix, PINV_TOL,
};

fn matrix(rows: usize, cols: usize, span: f64) -> impl Strategy<Value = Matrix<f64>> {
    prop::collection::vec(-span..span, rows * cols).prop_map(move |d| Matrix::new(rows, cols, d).unwrap())
}

fn square(n: usize) -> impl Strategy<Value = Matrix<f64>> {
    matrix(n, n, 2.0)
}

/// `X·Y` with inner dimension `r`, so rank ≤ r.
fn low_rank() -> impl Strategy<Value = Matrix<f64>> {
    (1..=4usize, 1..=4usize, 1..=4usize)
        .prop_flat_map(|(m, k, r)| (matrix(m, r, 2.0), matrix(r, k, 2.0)))
        .prop_map(|(x, y)| &x * &y)
}

/// Smallest retained singular value relative to the largest.
fn conditioning(a: &Matrix<f64>) -> f64 {
    let s = svd(a).singular_values;
    let top = s.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 1.0;
    }
    s.iter().filter(|&&x| x > PINV_TOL * top).fold(top, |m, &x| m.min(x)) / top
}

fn sym(n: usize) -> impl Strategy<Value = SymMatrix<f64>> {
    square(n).prop_map(|m| SymMatrix::symmetrize(&m + &m.transpose()))
}

proptest! {
    #![proptest_config(common::cases(200))]

    #[test]
    fn penrose_identities(a in low_rank()) {
        prop_assume!(conditioning(&a) > 1e-3);
        let x = pseudo_inverse(&a, PINV_TOL);
        let ax = &a * &x;
        let xa = &x * &a;
        prop_assert!((&(&ax * &a) - &a).max_abs() <= 1e-9);
        prop_assert!((&(&xa * &x) - &x).max_abs() <= 1e-9 * (1.0 + x.max_abs()));
        prop_assert!(ax.asymmetry() <= 1e-9);
        prop_assert!(xa.asymmetry() <= 1e-9);
    }

    #[test]
    fn symmetric_pseudo_inverse_commutes(g in low_rank(), h in low_rank(), psd in any::<bool>()) {
        let n = g.rows();
        prop_assume!(h.rows() == n);
        let gg = &g * &g.transpose();
        let m = if psd { gg } else { &gg - &(&h * &h.transpose()) };
        let m = SymMatrix::symmetrize(m);
        prop_assume!(conditioning(m.as_matrix()) > 1e-3);
        let x = m.pseudo_inverse(PINV_TOL);
        let lhs = m.as_matrix() * x.as_matrix();
        let rhs = x.as_matrix() * m.as_matrix();
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-9);
        if psd {
            prop_assert!(is_psd(&x, 1e-9));
        }
    }

    #[test]
    fn schur_forms_agree(n in 1..=3usize, m in 1..=3usize, seed in any::<u64>(), factored in any::<bool>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let k = n + m;
        let block = if factored {
            let r = rng.random_range(1..=k);
            let g = Matrix::from_fn(r, k, |_, _| rng.random_range(-1.0..1.0));
            SymMatrix::symmetrize(&g.transpose() * &g)
        } else {
            let g = Matrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
            SymMatrix::symmetrize(&g + &g.transpose())
        };
        let b = block.as_matrix();
        let mm = SymMatrix::symmetrize(b.block(0, 0, n, n));
        let l = b.block(0, n, n, m);
        let nn = SymMatrix::symmetrize(b.block(n, n, m, m));
        prop_assert_eq!(
            extended_schur_holds(&mm, &l, &nn, 1e-9),
            schur_conditions(&mm, &l, &nn, 1e-9).all()
        );
    }

    #[test]
    fn vec_operator_matches_direct(
        (a, c, x) in (1..=4usize).prop_flat_map(|n| (square(n), square(n), sym(n)))
    ) {
        let n = a.rows();
        let k = vec_lyapunov_matrix(&a, &c);
        let xm = x.as_matrix();
        let direct = &(&(&a.transpose() * xm) + &(xm * &a)) + &(&(&c.transpose() * xm) * &c);
        let kv = k.mul_vec(&xm.vec());
        let scale = 1.0 + direct.max_abs();
        prop_assert!((&Matrix::unvec(&kv, n, n) - &direct).max_abs() <= 1e-12 * scale);
    }

    #[test]
    fn two_by_two_eigenvalues(a in square(2)) {
        let ev = eigenvalues(&a).unwrap();
        prop_assert_eq!(ev.len(), 2);
        let tr = a.trace();
        let det = a.as_slice()[0] * a.as_slice()[3] - a.as_slice()[1] * a.as_slice()[2];
        let (p, q) = (ev[0], ev[1]);
        prop_assert!((p.re + q.re - tr).abs() <= 1e-12 * (1.0 + tr.abs()));
        prop_assert!((p.im + q.im).abs() <= 1e-12);
        let prod_re = p.re * q.re - p.im * q.im;
        let prod_im = p.re * q.im + p.im * q.re;
        prop_assert!((prod_re - det).abs() <= 1e-12 * (1.0 + det.abs()));
        prop_assert!(prod_im.abs() <= 1e-12 * (1.0 + det.abs()));
    }

    #[test]
    fn two_by_two_symmetric_extremes(s in sym(2)) {
        let m = s.as_matrix().as_slice();
        let det = m[0] * m[3] - m[1] * m[2];
        let (lo, hi) = (s.min_eigenvalue(), s.max_eigenvalue());
        prop_assert!((lo + hi - s.as_matrix().trace()).abs() <= 1e-12 * (1.0 + s.as_matrix().max_abs()));
        prop_assert!((lo * hi - det).abs() <= 1e-12 * (1.0 + det.abs() + s.as_matrix().max_abs().powi(2)));
    }
}

#[test]
fn column_stacking() {
    let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
    assert_eq!(a.vec(), vec![1.0, 3.0, 2.0, 4.0]);
}
