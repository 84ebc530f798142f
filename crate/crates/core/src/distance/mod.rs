//! Distances between empirical laws: exact one-dimensional and assignment
//! Wasserstein distances, the coupling cost of a synchronous coupling,
//! histogram total variation, and decay-rate fits.

mod assignment;
mod fit;
mod measure;
mod tv;
mod wasserstein;

pub use assignment::solve_assignment;
pub use fit::{decay_fit, DecayFit, DecayModel};
pub use measure::EmpiricalMeasure;
pub use tv::{tv_histogram, BinRule};
pub use wasserstein::{
    coupling_cost, wasserstein_1d, wasserstein_assignment, wasserstein_subsampled, ASSIGNMENT_CAP,
};
