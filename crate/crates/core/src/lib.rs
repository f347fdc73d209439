//! Similarity learning on SPD matrices via dimensionality-reducing congruence maps.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod config;
pub mod descriptors;
pub mod error;
pub mod evalkit;
pub mod io;
pub mod manifold;
pub mod matfun;
pub mod optimizer;
pub mod pairgraph;
pub mod pipeline;
pub mod spd;

pub use error::{Error, Result};
