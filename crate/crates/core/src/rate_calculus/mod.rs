//! Rate-generating integrals for total-variation and Wasserstein bounds.
//!
//! A [`RateFunction`] φ yields the total-variation rate `φ(Φ⁻¹(t))` with
//! `Φ(t) = ∫₁ᵗ ds/φ(s)`. A [`ModulusPair`] `(f, ψ, γ, Γ)` yields the coupling
//! bound `Ψ_κ⁻¹(Γt)` with `Ψ_κ(t) = ∫ₜ^κ ds/ψ(s)`, which is also the solution
//! of the comparison equation `f′ = −Γψ(f)`.

use std::sync::Arc;

mod family;
mod gronwall;
mod modulus;
mod rate;

pub use family::Family;
pub use gronwall::{gronwall_bound, verify_gronwall, GronwallCurve, GronwallReport};
pub use modulus::{Kappa, ModulusPair};
pub use rate::RateFunction;

/// Shared, thread-safe scalar function handle.
pub type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
