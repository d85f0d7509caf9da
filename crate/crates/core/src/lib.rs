// `!(x > 0.0)` is how NaN gets rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod descriptors;
pub mod embedio;
pub mod error;
pub mod evalbench;
pub mod latgraph;
pub mod lfm;
pub mod nearest;
pub mod pipeline;
pub mod spectral;
pub mod transfer;

pub use error::{Error, Result};
