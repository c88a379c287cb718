//! Behavioral decision-task harness: seedable IGT/CGT/WCST engines, scripted
//! and chat-model players, behavioral scoring, rank statistics, and
//! cognitive-model fitting.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod cogfit;
pub mod engine;
pub mod harness;
pub mod llm;
pub mod metrics;
pub mod rng;
pub mod stats;
