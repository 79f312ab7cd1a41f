//! Differentially private continual counting.
//!
//! Streaming prefix sums over bit streams with k-ary tree mechanisms, where
//! signed (offset) digits let a prefix be formed by subtracting right-hand
//! subtrees instead of adding left-hand ones. Alongside the mechanisms:
//! noise calibration for pure and approximate DP, closed-form error analysis
//! and a simulator for the random-input lower-bound construction.

pub mod analysis;
pub mod cli;
pub mod digits;
pub mod error;
pub mod lowerbound;
pub mod mechanisms;
pub mod noise;

pub use digits::{DigitVector, Variant};
pub use error::{Error, Result};
pub use mechanisms::{ContinualCounter, Mechanism, MechanismConfig};
