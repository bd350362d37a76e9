//! Fill- and bandwidth-reducing orderings over sparsity patterns.

mod amd;
mod rcm;

pub use amd::{amd_order, symbolic_fill};
pub use rcm::{bandwidth, rcm_order};
