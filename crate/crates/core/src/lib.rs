//! Energy-preserving operator-splitting solvers for the three-dimensional
//! stochastic Maxwell equations with multiplicative Stratonovich noise
//!
//! ```text
//! eps dE =  curl H dt - lambda H o dW
//! mu  dH = -curl E dt + lambda E o dW
//! ```
//!
//! on a periodic box, driven by a truncated Karhunen-Loeve Q-Wiener
//! process. Two splitting methods are provided: method I splits the curl
//! into its upper/lower triangular parts (two three-sweep stages), method
//! II splits it by coordinate direction (three single-axis stages). Both
//! discretize each one-dimensional subsystem with an implicit midpoint
//! step over periodic compact-difference stencils and close the step with
//! the exact pointwise rotation generated by the noise increment, so the
//! discrete energy `eps ||E||^2 + mu ||H||^2` is a step invariant up to
//! roundoff.
//!
//! Module map:
//!
//! - [`field`]: grid, medium, field state, lattice line views.
//! - [`circulant`]: compact-difference stencils and the spectral solver
//!   for the coupled implicit line systems.
//! - [`stepper`]: stage tables and the full time steps of both methods.
//! - [`noise`]: Karhunen-Loeve increments, path coarsening, the exact
//!   rotation stage, increment dumps.
//! - [`diagnostics`]: discrete energy, reference errors, convergence
//!   orders.
//! - [`oracle`]: slow dense reference implementations used to validate
//!   the fast path.
//! - [`config`] / [`experiment`] / [`csv`]: the experiment runner behind
//!   the `maxsplit` binary.

pub mod circulant;
pub mod config;
pub mod csv;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod field;
pub mod noise;
pub mod oracle;
pub mod stepper;

pub use error::{Error, Result};
