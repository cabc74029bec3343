//! Infinite-horizon stochastic linear-quadratic zero-sum differential games.
//!
//! The state `X` obeys
//!
//! ```text
//! dX = [AX + B₁u₁ + B₂u₂ + b]dt + [CX + D₁u₁ + D₂u₂ + σ]dW
//! ```
//!
//! and player 1 minimizes, player 2 maximizes, the quadratic cost
//! `E∫₀^∞ ⟨Q X, X⟩ + 2⟨S X, u⟩ + ⟨R u, u⟩ + 2⟨q, X⟩ + 2⟨ρ, u⟩ dt`.
//!
//! Modules, bottom to top:
//!
//! * [`matcore`]: dense matrices, symmetric matrices, LU / eigen / SVD, pseudo-inverse.
//! * [`stability`]: mean-square stability and stabilizer synthesis.
//! * [`riccati`]: the game Riccati equation, its solvers and classification.
//! * [`bsde`]: linear infinite-horizon BSDEs with deterministic drivers.
//! * [`saddle`]: closed-loop saddle-point synthesis and the value function.
//! * [`mcsim`]: Euler–Maruyama Monte-Carlo verification.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar type.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bsde;
pub mod error;
pub mod exppoly;
pub mod matcore;
pub mod mcsim;
pub mod riccati;
pub mod saddle;
pub mod scalar;
pub mod search;
pub mod stability;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix64 = matcore::Matrix<f64>;
pub type Matrix32 = matcore::Matrix<f32>;
pub type SymMatrix64 = matcore::SymMatrix<f64>;
pub type SymMatrix32 = matcore::SymMatrix<f32>;
pub type ExpPoly64 = exppoly::ExpPoly<f64>;
pub type ExpPoly32 = exppoly::ExpPoly<f32>;
pub type GameSpec64 = riccati::GameSpec<f64>;
pub type GameSpec32 = riccati::GameSpec<f32>;
pub type SaddleSolution64 = saddle::SaddleSolution<f64>;
pub type SaddleSolution32 = saddle::SaddleSolution<f32>;
pub type SimConfig64 = mcsim::SimConfig<f64>;
pub type SimConfig32 = mcsim::SimConfig<f32>;
