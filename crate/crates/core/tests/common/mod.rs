#![allow(dead_code)]

use zslq::exppoly::{ExpPoly, ExpTerm};
use zslq::matcore::{Matrix, SymMatrix};
use zslq::riccati::{ForcingTerms, GameCost, GameSpec, GameSystem};

pub fn nonstabilizing() -> GameSpec<f64> {
    GameSpec::scalar_one_player(-2.0, -1.0, 2.0, 1.0, 2.0, 0.0, -0.5)
}

pub fn singular() -> GameSpec<f64> {
    GameSpec::scalar_one_player(-0.25, -2.0, 1.0, 1.0, 0.5, -1.0, 1.0)
}

/// Scalar two-player game with the given diffusion coefficients.
pub fn two_player(a: f64, c: f64, d1: f64, d2: f64) -> GameSpec<f64> {
    let s = Matrix::scalar;
    GameSpec::new(
        GameSystem {
            a: s(a),
            c: s(c),
            b1: s(1.0),
            b2: s(1.0),
            d1: s(d1),
            d2: s(d2),
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

pub fn two_player_scalar() -> GameSpec<f64> {
    two_player(-1.0, 0.0, 0.0, 0.0)
}

pub fn two_player_forced() -> GameSpec<f64> {
    let mut f = ForcingTerms::zero(1, 1, 1);
    f.b = ExpPoly::new(1, vec![ExpTerm::new(vec![1.0], 0, 1.0).unwrap()]).unwrap();
    two_player_scalar().with_forcing(f).unwrap()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Fixed-seed proptest configuration, so every run draws the same cases.
pub fn cases(n: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases: n,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5EED),
        failure_persistence: None,
        ..Default::default()
    }
}
