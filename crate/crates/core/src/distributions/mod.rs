//! Probability plumbing: signal priors, quantile functions, Gaussian quadrature,
//! posterior means and seeded random streams.

pub mod normal;
mod pieces;
mod prior;
mod quadrature;
mod quantile;
mod rng;

pub use pieces::{PiecewiseRisk, Tail};
pub use prior::{
    posterior_mean, Atom, Component, GaussianComponent, ObservationComponent, ObservationLaw,
    PriorSpec,
};
pub use quadrature::{gauss_hermite, gauss_legendre_unit, QuadratureRule};
pub use quantile::{
    quantile, regular_grid, regular_sequence, HalfNormal, Interpolation, QuantileFunction,
    QuantileTable, StandardNormal, Uniform,
};
pub use rng::RngStream;
