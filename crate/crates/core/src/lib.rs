//! Multi-beam OFDMA downlink scheduling: fading channels, opportunistic
//! beam/user selection, water-filling power and adaptive dual rate balancing.

// NaN-rejecting range checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod channel;
pub mod cli;
pub mod config;
pub mod dual;
pub mod error;
pub mod metrics;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
