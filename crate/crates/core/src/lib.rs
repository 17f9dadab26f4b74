#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod align;
pub mod camera;
pub mod cli;
pub mod dim;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod raster;
pub mod render;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
