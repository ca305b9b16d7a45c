//! Solver and verification toolkit for a heterogeneous-agent data economy.
//!
//! Agents differ in their data investment ability `mu_i ~ N(mu_bar, sigma_mu^2)`.
//! Those above an endogenous threshold buy data and invest as data users; the
//! rest sell data as providers. This crate computes that threshold, its
//! comparative statics in the data cost rate, the financial-friction
//! coefficient implied by jump-diffusion capital dynamics, and finite-population
//! Monte Carlo checks of the continuum results.
//!
//! All model math is generic over [`Real`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`, which is what the CLI uses.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod mc;
pub mod model;
pub mod numerics;
pub mod scalar;
pub mod statics;
pub mod threshold;
pub mod verify;
pub mod wealth;

pub use error::{Error, Result};
pub use model::{validate, LossDistribution, RawParams, ValidationError, Violation};
pub use scalar::Real;
pub use mc::CheckReport;
pub use threshold::{Classification, Role};

pub type ModelParams = model::ModelParams<f64>;
pub type ModelParams32 = model::ModelParams<f32>;
pub type GaussianSpec = numerics::GaussianSpec<f64>;
pub type QuadratureRule = numerics::QuadratureRule<f64>;
pub type ThresholdSolution = threshold::ThresholdSolution<f64>;
pub type ThresholdSolution32 = threshold::ThresholdSolution<f32>;
pub type Theorem1Report = statics::Theorem1Report<f64>;
pub type LambdaSolution = wealth::LambdaSolution<f64>;
pub type WealthPath = wealth::WealthPath<f64>;
pub type InitialShocks = wealth::InitialShocks<f64>;
pub type Figure1Table = wealth::Figure1Table<f64>;
pub type PopulationSample = mc::PopulationSample<f64>;
