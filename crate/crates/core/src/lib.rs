//! Sorted-ℓ1 penalized regression (SLOPE) and its high-dimensional asymptotics.
//!
//! The crate is organized bottom-up:
//!
//! * [`distributions`]: signal priors, quantile functions, Gaussian quadrature,
//!   posterior means and seeded random streams.
//! * [`sorted_l1`]: the sorted-ℓ1 norm, its exact proximal operator and Moreau envelope.
//! * [`slope_solver`]: synthetic Gaussian-design instances, an accelerated
//!   proximal-gradient SLOPE solver and selection/estimation metrics.
//! * [`limiting_scalar`]: the scalar function that the prox converges to
//!   coordinate-wise as the dimension grows.
//! * [`state_evolution`]: the scalar fixed-point pair `(σ, τ)` that predicts the
//!   risk of SLOPE for a given prior and regularization distribution.
//! * [`design`]: oracle-optimal regularization distributions (minimum MSE and
//!   maximum power at a fixed type-I level) plus LASSO and BHq baselines.
//! * [`harness`]: the reproducible experiment runner behind the `slope-harness` binary.

pub mod design;
pub mod distributions;
mod error;
mod roots;
pub mod harness;
pub mod limiting_scalar;
pub mod slope_solver;
pub mod sorted_l1;
pub mod state_evolution;

pub use error::{Error, Result};
