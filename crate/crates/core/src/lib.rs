//! Simulation and estimation toolkit for the COGARCH(1,1) model.
//!
//! The crate is organised bottom-up:
//!
//! * [`levy`]: driving Lévy process models, jump moments, the Laplace
//!   exponent `Ψ_θ(p)` and seeded increment sampling.
//! * [`cogarch`]: volatility and return simulation on an equally spaced grid,
//!   β-rescaling, the `K_s(φ)` process and pathwise `(η, φ)` gradients.
//! * [`aux_ar`]: the auxiliary AR(r) model of squared returns: sample
//!   autocovariances, Yule–Walker and least squares fits, and the long-run
//!   covariance estimate of the auxiliary estimator.
//! * [`binding`]: the map `θ ↦ π_θ` with analytic and Monte Carlo backends.
//! * [`estimators`]: method of moments, the binding-function indirect
//!   inference estimator (IIE*), the simulation-based IIE with common random
//!   numbers, and the sandwich covariance `Ξ`.
//! * [`bench`]: parameter grids, the replication study harness and its
//!   report/CSV outputs.

pub mod aux_ar;
pub mod bench;
pub mod binding;
pub mod cogarch;
pub mod error;
pub mod estimators;
pub mod levy;
pub mod linalg;
pub mod optimize;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
pub use levy::{CogarchParams, LevyModel};
