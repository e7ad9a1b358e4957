//! Energy-stable coupling of high-order finite difference and discontinuous
//! Galerkin discretizations of the 2-D acoustic wave equation.
//!
//! The building blocks are:
//!
//! * [`sbp`] — 1-D diagonal-norm summation-by-parts derivative operators,
//! * [`glue`] — piecewise-polynomial interface spaces and norm-compatible
//!   projection pairs that move traces between a grid and the glue,
//! * [`geometry`] — curvilinear block transforms and metric data,
//! * [`fd`] — the SBP-SAT semi-discretization on curvilinear blocks,
//! * [`coupling`] — interface assembly: composed projections, scaled traces
//!   and starred (penalty) values on a shared glue space,
//! * [`dg`] — a nodal DG method on (curved) triangles for the same system,
//! * [`harness`] — scenarios, time integration, error/rate measurement,
//!   energy traces, and global-operator spectra.

pub mod coupling;
pub mod dg;
pub mod error;
pub mod fd;
pub mod geometry;
pub mod glue;
pub mod harness;
pub mod poly;
pub mod sbp;

mod lsq;

pub use error::Error;
pub use sbp::SbpOperator1D;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
