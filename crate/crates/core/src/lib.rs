//! Solver library for ferromagnetic Ising models on multispecies k-regular
//! random graphs.
//!
//! The pipeline: validate a model instance ([`model`]), sample graph
//! realizations ([`graphgen`]), run the cavity recursion to a fixed point
//! ([`cavity`]), evaluate magnetizations, correlations and the Bethe pressure
//! there ([`observables`]), and locate the phase transition through the
//! weighted non-backtracking matrix ([`spectral`]). Everything is checked at
//! desk scale against exact enumeration ([`exact`]) and Glauber-dynamics
//! Monte Carlo ([`mcmc`]).

pub mod cavity;
pub mod error;
pub mod exact;
pub mod graphgen;
pub mod mcmc;
pub mod model;
pub mod observables;
pub mod sampler;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{ClassEdgeSet, FeasibilityReport, ModelSpec, Rational};
