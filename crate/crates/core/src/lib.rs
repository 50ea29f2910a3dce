//! Coreset selection for regression by sketchy moment matching, with the
//! classical baselines, a ridge evaluator and a Gaussian-mixture benchmark.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod evaluator;
pub mod io;
pub mod matrix;
pub mod moments;
pub mod rng;
pub mod selectors;
pub mod sketch;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::DenseMatrix;
