//! Core machinery for recommending data-free class-incremental learning
//! (DFCIL) algorithms.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! * [`stream`]: scenarios, feature streams, a seeded Gaussian feature-space
//!   domain and the simulator that builds a plausible future stream from the
//!   first step of a real one.
//! * [`algorithms`]: the candidate portfolio (NCM, streaming LDA, FeCAM-style
//!   Mahalanobis, FeTrIL-style pseudo-feature replay and a balanced-softmax
//!   linear head) behind one incremental interface.
//! * [`eval`]: incremental runs and average incremental accuracy.
//! * [`recommend`]: oracle, greedy / t-greedy / explore-then-prune strategies,
//!   gaps, aggregation, subset ablation and recommendation dynamics.
//! * [`embedding`]: class-name embedding diagnostics.
//!
//! File formats, configuration and the command line live in the `cilrec`
//! crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod algorithms;
pub mod embedding;
mod error;
pub mod eval;
pub mod linalg;
pub mod recommend;
pub mod stream;

pub use error::{Error, Result};

/// Dense integer class identifier.
pub type ClassId = u32;
