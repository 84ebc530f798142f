//! Path simulation: Euler–Maruyama ensembles, synchronously coupled pairs,
//! jump SDEs with finite Lévy measure, and subordinator marginals.
//!
//! Each path (or sample batch) draws from its own ChaCha substream keyed by
//! the seed and its index, so every ensemble is bitwise reproducible
//! regardless of thread count.

mod diffusion;
mod ensemble;
mod jumps;
mod rng;
mod subordinator;

pub use diffusion::{euler_maruyama, synchronous_pair};
pub use ensemble::{PathEnsemble, SimOptions, EXPLOSION_RADIUS};
pub use jumps::{fit_moment_delta, jump_sde, JumpLaw, JumpSdeSpec};
pub use rng::{substream, Stream};
pub use subordinator::{subordinator_sample, PositiveJumpLaw, SubordinatorSpec};
