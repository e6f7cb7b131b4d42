//! Test-time adaptation for image super-resolution.

pub mod adapt;
pub mod error;
pub mod experiment;
pub mod imaging;
pub mod benchgen;
pub mod classifier;
pub mod degrade;
pub mod nn;
pub mod preserve;
pub mod rng;

mod fsutil;

pub use error::{Error, Result};
