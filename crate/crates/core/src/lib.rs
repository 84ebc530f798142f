//! Numerical checks for sub-geometric ergodicity of diffusions and jump
//! diffusions.
//!
//! The crate evaluates the radial drift functionals of an SDE, decides the
//! integral test for total-variation rates, builds and verifies the matching
//! Lyapunov functions, and validates Wasserstein contraction bounds against
//! simulated synchronous couplings.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases at the crate root fix the type to `f64`.

// `!(x > 0)` is used on purpose so that NaN fails argument checks, and the
// grid loops index several parallel arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod distance;
pub mod drift_geometry;
pub mod error;
pub mod lyapunov;
pub mod quadrature;
pub mod rate_calculus;
pub mod roots;
pub mod scalar;
pub mod simulate;
pub mod subordinate;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type RateFunction64 = rate_calculus::RateFunction<f64>;
pub type ModulusPair64 = rate_calculus::ModulusPair<f64>;
pub type CoefficientModel64 = drift_geometry::CoefficientModel<f64>;
pub type RadialProfile64 = drift_geometry::RadialProfile<f64>;
pub type LambdaVerdict64 = drift_geometry::LambdaVerdict<f64>;
pub type LyapunovTable64 = lyapunov::LyapunovTable<f64>;
pub type PathEnsemble64 = simulate::PathEnsemble<f64>;
pub type JumpSdeSpec64 = simulate::JumpSdeSpec<f64>;
pub type EmpiricalMeasure64 = distance::EmpiricalMeasure<f64>;
pub type DecayFit64 = distance::DecayFit<f64>;
pub type SubordinatedRate64 = subordinate::SubordinatedRate<f64>;
pub type GronwallCurve64 = rate_calculus::GronwallCurve<f64>;
