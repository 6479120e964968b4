//! Optimal star-body regularizers.
//!
//! Given a data distribution `P` (an analytic density or a sample set) this
//! crate builds the summary body `L_P` whose radial function is the radial
//! statistic `ρ_P(u) = (∫₀^∞ r^d p(ru) dr)^{1/(d+1)}`, rescales it to the
//! unit-volume body `K★` that minimizes `E_P‖x‖_K`, diagnoses its convexity,
//! and fits parametric families of star bodies by empirical risk minimization.

// `!(x > 0.0)` style checks reject NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(feature = "cli")]
pub mod cli;
pub mod density;
pub mod error;
pub mod geometry;
pub mod gibbs;
pub mod grid;
pub mod io;
pub mod learn;
pub mod lp;
pub mod optimizer;
pub mod par;
pub mod quadrature;
pub mod random;
pub mod vecmath;

pub use error::{Error, Result};
pub use geometry::{GeometryTolerances, StarBody};
pub use grid::SphericalGrid;
