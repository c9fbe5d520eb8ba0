//! Minimum mean square estimation under sublinear expectations on finite
//! sample spaces.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod gexp;
pub mod lp;
pub mod measures;
pub mod rng;
pub mod sample;
pub mod space;
pub mod stability;
pub mod sublinear;

pub use error::{MmseError, Result};
