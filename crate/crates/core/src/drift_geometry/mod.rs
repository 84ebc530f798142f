//! Radial drift functionals and the integral test for sub-geometric rates.
//!
//! For a centre `x₀` and base radius `r₀` the module tabulates
//! `γ(r) = inf_{|x−x₀|=r} C(x)`, `ι(r) = sup_{|x−x₀|=r} (2A − C + 2B)/C` and
//! `I(r) = ∫_{r₀}^r ι(s)/s ds`, decides whether the drift integral Λ is
//! finite, and provides the classical polynomial condition, a sufficient
//! condition via integration by parts, jump-compensated variants and a scan of
//! the one-sided flatness condition used for Wasserstein contraction.

mod classical;
mod flatness;
mod lambda;
mod model;
mod profile;
pub mod sphere;
mod sufficient;

pub use classical::{
    check_p1_implication, check_subgeo_classical, max_feasible_gamma, ClassicalOptions, ClassicalVerdict,
    P1Options, P1Verdict,
};
pub use flatness::{certify_flatness, symmetric_grid, FlatnessCertificate};
pub use lambda::{lambda_constant, LambdaOptions, LambdaVerdict, SegmentContribution};
pub use model::{clamp_neg, CoefficientModel, Diffusion, FieldFn, JumpKernel, JumpKind, RegularityHints, SupportFn};
pub use profile::{
    jump_second_moment_form, n_matrix_profile, pointwise_functionals, radial_profile, Functionals, ProfileKind,
    ProfileOptions, RadialProfile,
};
pub use sphere::SphereOptions;
pub use sufficient::{sub_sufficient, SufficientBound, SufficientClause, SufficientOptions};

pub(crate) use lambda::{ln_half_left, ln_panel};
pub use lambda::ls_slope;
