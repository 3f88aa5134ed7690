//! Encrypted spiking-neural-network inference over RNS-CKKS.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithmic piece:
//! ring arithmetic, the CKKS scheme, the backend abstraction with an exact
//! slot simulator, Chebyshev step approximation, vector-encoded linear
//! layers, the LIF evaluators and the planner/driver. File formats and the
//! command-line front end live in the `snnhe` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod approx;
pub mod backend;
pub mod ckks;
pub mod error;
pub mod layers;
pub mod lif;
pub mod network;
pub mod planner;
pub mod ring;

pub use error::{Error, Result};
