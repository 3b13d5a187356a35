//! Free Hausdorff and packing dimension estimators for matricial microstates.

// `!(x > 0.0)` is used on purpose so that NaN lands on the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod error;
pub mod harness;
pub mod matrixcore;
pub mod metricgeom;
pub mod microstates;
pub mod oracle;
pub mod rmtformulas;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
