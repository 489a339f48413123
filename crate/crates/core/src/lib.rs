//! Multi-step fabric folding on a particle cloth model.
//!
//! The pipeline splits a folding task into three parts:
//!
//! - [`roadmap`]: a latent space roadmap built over encoded observations
//!   ([`latent`]) that yields the shortest sequence of intermediate fold
//!   states between a start and a goal observation.
//! - [`flow`]: a flow-based action module that turns a (current, sub-goal)
//!   pair into one grasp-and-place action via a pick heatmap and a flow
//!   query at the pick pixel.
//! - [`executor`]: the closed loop that re-observes, re-plans and re-acts
//!   after every action, plus the ablation executors and the tiered
//!   benchmark harness.
//!
//! [`cloth`] provides the reflection-fold particle model, top-down
//! rendering and the evaluation metrics; [`data`] generates and persists the
//! transition corpus everything else is fitted on.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cloth;
pub mod config;
pub mod data;
pub mod error;
pub mod executor;
pub mod flow;
pub mod latent;
pub mod roadmap;
mod seed;
pub(crate) mod util;

pub use error::{Error, Result};
pub use seed::derive_seed;
