//! Entanglement-swapping simulation and collectibility diagnostics.
//!
//! Everything here is pure computation over small dense matrices and runs
//! without `std`; file formats and the command-line front end live in the
//! `esdiag` crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod channels;
pub mod diagnose;
pub mod error;
pub mod qmat;
pub mod sampler;
pub mod swapnet;
pub mod witness;

pub use error::{Error, Result};
