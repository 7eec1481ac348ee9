//! Federated multi-agent actor-critic for joint-transmission CoMP clustering.

// Validation uses `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod env;
pub mod baselines;
pub mod federation;
pub mod info;
pub mod learn;
pub mod harness;
