//! Spectral construction of analytic disks attached to small perturbations
//! of the sphere `S^n ⊂ C^n`, the Levi-flat hull they foliate, its
//! CR-singular locus, and partial-index certificates along each disk.

// `!(x <= tol)` is deliberate: NaN must fail every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attach;
pub mod error;
pub mod export;
pub mod foliation;
pub mod fourier;
pub mod indices;
pub mod json;
pub mod linalg;
pub mod locus;
pub mod perturbation;
pub mod rh;

pub use error::{Error, Result};
