//! File formats, configuration, parallel helpers and the command line for
//! the Tempotron pulse classifier in `tempotron-core`.
//!
//! Every file this crate writes goes through [`atomic::write_atomic`], so a
//! crash never leaves a half-written artifact behind.

pub mod atomic;
pub mod cli;
pub mod config;
pub mod dataset_csv;
pub mod dump;
pub mod error;
pub mod export;
pub mod model_json;
pub mod parallel;

pub use error::Error;
