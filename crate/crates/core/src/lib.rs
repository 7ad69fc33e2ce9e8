//! Numerical companion to the information-geometric reconstruction of
//! finite-dimensional quantum theory.
//!
//! Modules build on one another: [`simplex`] holds the information metric on
//! probability distributions, [`bayes`] the coin-distinguishing experiment
//! that motivates it, [`statespace`] the hypersphere of real amplitudes and
//! its complex form, [`transforms`] the orthogonal maps and their unitary or
//! antiunitary counterparts, [`measurement`] the Born-rule measurement model,
//! and [`distmax`] the maximization of statistical distance over
//! measurements. [`cli`] and [`report`] drive seeded verification runs.

pub mod bayes;
pub mod cli;
pub mod distmax;
pub mod error;
pub mod measurement;
pub mod report;
pub mod rng;
pub mod simplex;
pub mod statespace;
pub mod transforms;

pub use error::{Error, Result};
