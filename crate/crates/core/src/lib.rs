//! Erasure-coded fault-tolerant symmetric eigensolvers.
//!
//! A symmetric eigenproblem is augmented *a priori* with redundancy blocks
//! derived from a sparse coding matrix. When fail-stop faults erase rows and
//! columns mid-solve, the solver reconstitutes an equivalent generalized
//! eigenproblem from the blocks and keeps iterating; the eigenvalues are
//! unchanged and the original eigenvectors are recovered with a cheap linear
//! map at the end.
//!
//! - [`coding`]: staggered sparse coding matrices and rank checks
//! - [`redundancy`]: the precomputed blocks and the explicit augmented pencil
//! - [`faults`]: fault events, schedules and cumulative fault state
//! - [`operators`]: the implicit reconstituted operators
//! - [`power`], [`tracemin`]: erasure-coded eigensolvers
//! - [`recovery`]: back-mapping to original coordinates, spurious detection
//! - [`io`]: Matrix Market files and persistence sidecars

pub mod coding;
pub mod error;
pub mod faults;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod operators;
pub mod power;
pub mod recovery;
pub mod redundancy;
pub mod result;
pub mod tracemin;

pub use error::{Error, Result};
