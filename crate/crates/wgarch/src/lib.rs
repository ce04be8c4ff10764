//! Weak-GARCH temporal aggregation, the weak-GARCH diffusion limit, its
//! exact discretization, and Monte Carlo option pricing with implied-vol
//! extraction.
//!
//! The crate is `no_std` + `alloc`: all numerics route through [`libm`] and
//! the only allocations are the path buffers in [`simulate`].

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod aggregation;
pub mod dist;
pub mod limit;
pub mod params;
pub mod pricing;
pub mod rng;
pub mod roots;
pub mod simulate;
