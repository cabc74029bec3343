mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zslq::exppoly::ExpPoly;
use zslq::matcore::{Matrix, SymMatrix};
use zslq::riccati::{mln, ForcingTerms, GameCost, GameSpec, GameSystem};
use zslq::saddle::{synthesize, value_at, SaddleOptions};

fn exp_term(rng: &mut ChaCha8Rng, dim: usize) -> ExpPoly<f64> {
    let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    ExpPoly::exponential(c, rng.random_range(0.5..2.0)).unwrap()
}

/// Two-player game with one control each, state dimension `n`.
fn random_game(rng: &mut ChaCha8Rng, n: usize, forced: bool) -> GameSpec<f64> {
    let mut m = |r: usize, c: usize, span: f64| Matrix::from_fn(r, c, |_, _| rng.random_range(-span..span));
    let a = &m(n, n, 0.5) - &Matrix::identity(n).scale(1.5);
    let (c, b1, b2, d1, d2) = (m(n, n, 0.3), m(n, 1, 1.0), m(n, 1, 1.0), m(n, 1, 0.3), m(n, 1, 0.3));
    let g = m(n, n, 1.0);
    let q = SymMatrix::symmetrize(&(&g * &g.transpose()) + &Matrix::identity(n).scale(0.5));
    let (s1, s2, r12) = (m(1, n, 0.3), m(1, n, 0.3), m(1, 1, 0.2));
    let r11 = SymMatrix::scalar(rng.random_range(0.5..2.0));
    let r22 = SymMatrix::scalar(-rng.random_range(1.0..3.0));
    let mut f = ForcingTerms::zero(n, 1, 1);
    if forced {
        f.b = exp_term(rng, n);
        f.sigma = exp_term(rng, n);
        f.q = exp_term(rng, n);
        f.rho1 = exp_term(rng, 1);
        f.rho2 = exp_term(rng, 1);
    }
    GameSpec::new(
        GameSystem { a, c, b1, b2, d1, d2 },
        GameCost { q, s1, s2, r11, r12, r22 },
        f,
    )
    .unwrap()
}

#[test]
fn synthesized_saddle_points_satisfy_their_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut solved = 0;
    for i in 0..60 {
        let n = 1 + i % 2;
        let spec = random_game(&mut rng, n, true);
        let Ok(sol) = synthesize(&spec, &SaddleOptions::default()) else { continue };
        solved += 1;
        let v = mln(&spec, &sol.p);
        let gi = &(v.n.as_matrix() * &sol.theta) + &v.l.transpose();
        assert!(gi.max_abs() <= 1e-8, "case {i}: gain identity {:e}", gi.max_abs());
        assert!(sol.zeta.is_zero());

        // η′ + Âη + ψ = 0 with Â = Aᵀ − L N† Bᵀ and
        // ψ = (Cᵀ − L N† Dᵀ) P σ − L N† ρ + P b + q.
        let f = spec.forcing();
        let p = sol.p.as_matrix();
        let ln = &v.l * v.n_pinv.as_matrix();
        let a_hat = &spec.a().transpose() - &(&ln * &spec.b().transpose());
        let c_hat = &spec.c().transpose() - &(&ln * &spec.d().transpose());
        // Projection: N u* + Bᵀη + DᵀPσ + ρ = 0.
        let dtp = &spec.d().transpose() * p;
        for t in [0.0, 0.1, 0.5, 1.0, 2.0, 5.0] {
            let eta = sol.eta.eval(t);
            let sig = f.sigma.eval(t);
            let rho = f.rho().eval(t);
            let psi: Vec<f64> = (0..n)
                .map(|j| {
                    c_hat.mul_vec(&p.mul_vec(&sig))[j] - ln.mul_vec(&rho)[j]
                        + p.mul_vec(&f.b.eval(t))[j]
                        + f.q.eval(t)[j]
                })
                .collect();
            let d_eta = sol.eta.derivative().eval(t);
            let a_eta = a_hat.mul_vec(&eta);
            let res: Vec<f64> = (0..n).map(|j| d_eta[j] + a_eta[j] + psi[j]).collect();
            assert!(common::max_abs(&res) <= 1e-9 * (1.0 + common::max_abs(&psi)), "case {i}, t = {t}: {res:?}");

            let nu = v.n.as_matrix().mul_vec(&sol.u_star.eval(t));
            let bt = spec.b().transpose().mul_vec(&eta);
            let ds = dtp.mul_vec(&sig);
            let proj: Vec<f64> = (0..2).map(|j| nu[j] + bt[j] + ds[j] + rho[j]).collect();
            assert!(common::max_abs(&proj) <= 1e-8, "case {i}, t = {t}: {proj:?}");
        }
    }
    assert!(solved >= 30, "only {solved} of 60 random games solved");
}

#[test]
fn homogeneous_games_collapse_to_the_quadratic_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut solved = 0;
    for i in 0..20 {
        let spec = random_game(&mut rng, 1 + i % 2, false);
        let Ok(sol) = synthesize(&spec, &SaddleOptions::default()) else { continue };
        solved += 1;
        assert!(sol.eta.is_zero() && sol.u_star.is_zero());
        let x: Vec<f64> = (0..spec.state_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        assert_eq!(value_at(&sol, &x), sol.p.quad(&x));
    }
    assert!(solved >= 10);
}

#[test]
fn value_does_not_depend_on_the_free_parameter() {
    let spec = common::singular();
    let sol = synthesize(&spec, &SaddleOptions::default()).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let base = value_at(&sol, &[1.0]);
    assert!((base + 1.0).abs() < 1e-12);
    for frac in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let th = 1.0 - h + 2.0 * h * frac;
        // N(P) = 0 here, so Θ = Π.
        let alt = sol.with_pi(&spec, Matrix::scalar(th)).unwrap();
        assert_eq!(alt.theta, Matrix::scalar(th));
        assert!((value_at(&alt, &[1.0]) - base).abs() <= 1e-9);
    }
}
