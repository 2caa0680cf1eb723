//! Simulation of strongly connected components in the critical directed
//! configuration model, the graph-free staged sampler that reproduces them,
//! and the continuum object they converge to.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuum;
pub mod degree_law;
pub mod error;
pub mod exploration;
pub mod fenwick;
pub mod forest;
pub mod graph;
pub mod harness;
pub mod limit;
pub mod mdm;
pub mod metric;
pub mod numerics;
pub mod rng;
pub mod scc;
pub mod staged;
pub mod stats;

pub use error::{Error, Result};
