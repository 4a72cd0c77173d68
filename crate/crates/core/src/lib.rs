//! Multi-step Brent crude price forecasting: data preparation, recurrent
//! networks trained on a small reverse-mode tape, a residual/sentiment
//! ensemble, and the `oilcast` experiment CLI.

pub mod cli;
pub mod dataset;
pub mod decompose;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod numeric;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
