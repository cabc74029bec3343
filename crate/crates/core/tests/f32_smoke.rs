mod common;

use zslq::exppoly::ExpPoly;
use zslq::matcore::Matrix;
use zslq::mcsim::{estimate_cost, simulate};
use zslq::riccati::{classify, solve_are, ClassifyOptions, SolveOptions};
use zslq::saddle::{synthesize, value_at, SaddleOptions};
use zslq::stability::{is_stabilizer, ControlledSystem};
use zslq::{GameSpec32, SimConfig32};

fn solve_opts() -> SolveOptions<f32> {
    SolveOptions { tol: 1e-5, ..Default::default() }
}

fn saddle_opts() -> SaddleOptions<f32> {
    SaddleOptions {
        solve: solve_opts(),
        classify: ClassifyOptions { residual_tol: 1e-4, range_tol: 1e-4, sign_tol: 1e-4, ..Default::default() },
        range_tol: 1e-4,
        ..Default::default()
    }
}

#[test]
fn two_player_game_in_single_precision() {
    let spec: GameSpec32 = common::two_player_forced().cast();
    let sol = synthesize(&spec, &saddle_opts()).unwrap();
    assert!((sol.p.as_matrix()[(0, 0)] - 0.5).abs() < 1e-5);
    assert!((sol.theta1()[(0, 0)] + 0.5).abs() < 1e-5 && (sol.theta2()[(0, 0)] - 0.5).abs() < 1e-5);
    assert!((value_at(&sol, &[1.0]) - 1.25).abs() < 1e-4);

    let cfg = SimConfig32 { dt: 1e-2, horizon: 20.0, paths: 64, seed: 1, antithetic: false, record_points: 50 };
    let ens = simulate(&spec, &sol.theta, &sol.u_star, &[1.0], &cfg).unwrap();
    let j = estimate_cost(&spec, &ens, &sol.theta, &sol.u_star).unwrap();
    // Deterministic dynamics: only the Euler bias separates J from V.
    assert!((j.mean - 1.25).abs() < 0.05, "{j:?}");
}

#[test]
fn scalar_examples_in_single_precision() {
    let nonstab: GameSpec32 = common::nonstabilizing().cast();
    let p = solve_are(&nonstab, &solve_opts()).unwrap();
    let one = p.iter().find(|p| (p.as_matrix()[(0, 0)] - 1.0).abs() < 1e-4).unwrap();
    let c = classify(&nonstab, one, &ClassifyOptions { residual_tol: 1e-4, ..Default::default() });
    assert!(!c.stabilizing);
    assert_eq!(c.projector_rank, 0);

    let sys = ControlledSystem::<f32>::scalar(-2.0, 2.0, -1.0, 1.0);
    assert!(is_stabilizer(&Matrix::scalar(-1.0f32), &sys).unwrap());
    assert!(!is_stabilizer(&Matrix::scalar(0.5f32), &sys).unwrap());

    let ex62: GameSpec32 = common::singular().cast();
    let sol = synthesize(&ex62, &saddle_opts()).unwrap();
    assert!((sol.p.as_matrix()[(0, 0)] + 1.0).abs() < 1e-4);
    assert!(sol.u_star.is_zero() && sol.eta == ExpPoly::zero(1));
}
