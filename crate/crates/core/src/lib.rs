//! Retrieval walks over embedding similarity spaces and the foraging
//! statistics used to compare them with semantic fluency data.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod embedding;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod pipeline;
pub mod samplers;
pub mod similarity;
pub mod stats;
pub mod tsne;
pub mod vocabulary;

pub use error::{Error, Result};
