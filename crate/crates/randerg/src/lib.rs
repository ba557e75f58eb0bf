//! Numerical laboratory for randomly selected, weight-modulated ergodic
//! averages: the selector process and its counting function, nets of
//! oscillatory weights, concrete dynamical systems, the averaging
//! operators in their several normalizations, TT* kernel machinery on
//! `l^2(Z)`, and seeded Monte Carlo concentration experiments.

pub mod averages;
pub mod concentration;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod kernels;
pub mod rng;
pub mod selector;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
