// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Numeric kernels index several arrays with one counter.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod calibration;
pub mod doe;
pub mod error;
pub mod hydration;
pub mod io;
pub mod mlp;
pub mod optimizer;
pub mod parallel;
pub mod pipeline;
pub mod strategies;
pub mod trainer;

pub use error::{Error, Result};
