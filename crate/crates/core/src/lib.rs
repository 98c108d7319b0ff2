//! Boundary control of one-dimensional `n × n` hyperbolic systems
//!
//! `∂_t w = Σ(x) ∂_x w + C(x) w`, `Σ = diag(-λ_1, …, -λ_k, λ_{k+1}, …, λ_{k+m})`,
//! with `w_-(t, 0) = B w_+(t, 0)` and controls on `w_+(t, 1)`.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases fix the scalar to `f64`.

pub mod backstepping;
pub mod bmatrix;
pub mod cli;
pub mod config;
pub mod controller;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod scalar;
pub mod simulator;
pub mod sweep;
pub mod system;
pub mod times;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix64 = linalg::Matrix<f64>;
pub type SystemSpec64 = system::SystemSpec<f64>;
pub type StateField64 = system::StateField<f64>;
pub type GridSpec64 = system::GridSpec<f64>;
pub type Trajectory64 = simulator::Trajectory<f64>;
