//! Exact finite-alphabet tools for information-theoretic privacy.
//!
//! Privacy and utility are both measured by mutual information: a privacy
//! filter `P_{Z|Y}` publishes `Z` from observable data `Y` while limiting
//! what `Z` reveals about private data `X`.
//!
//! * [`prob`]: pmfs, kernels, joints, entropies, total variation.
//! * [`filters`]: privacy filters and their exact evaluation.
//! * [`perfect`]: zero leakage; weak independence and the vertices of `D0`.
//! * [`rate`]: the rate-privacy function for positive leakage budgets.
//! * [`private_info`]: minimal sufficient statistics, `C_X(Y)` / `D_X(Y)`,
//!   and bounds on the common-information chain.
//! * [`multiletter`]: the near-uniform binning construction over `Y^n`.
//! * [`io`] and [`cli`]: distribution files, reports and the command line.

pub mod enumerate;
pub mod cli;
pub mod error;
pub mod filters;
pub mod io;
pub mod multiletter;
pub mod perfect;
pub mod private_info;
pub mod prob;
pub mod rate;

pub use error::{Error, Result};
pub use prob::{JointDistribution, Kernel, Pmf};
