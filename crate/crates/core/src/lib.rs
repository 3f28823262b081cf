//! Actor-critic cart-pole agent with pseudorehearsal, plus the harness used to compare
//! rehearsal strategies over many seeded runs.
//!
//! Module map:
//! - [`mlp`]: one-hidden-layer network, online and batch backprop
//! - [`cartpole`]: single-pole dynamics
//! - [`encoding`]: sign-split observation vector
//! - [`agent`]: softmax actor, SARSA critic, online learning loop
//! - [`rehearsal`]: pseudoitem capture, orthogonal correction and batch co-training
//! - [`lab`]: runs, comparisons, statistics, CSV and CLI

pub mod agent;
pub mod cartpole;
pub mod encoding;
pub mod error;
pub mod lab;
pub mod mlp;
pub mod rehearsal;

pub use error::{Error, Result};
