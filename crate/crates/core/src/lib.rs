//! Dual-track streaming dialogue: early connectives from a small model while a
//! large model prepares the main response.

// NaN-rejecting range checks read as `!(x > 0.0)`
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod components;
pub mod config;
pub mod math;
pub mod metrics;
pub mod miner;
pub mod orchestrator;
pub mod policy;
pub mod stub;
pub mod synth;
