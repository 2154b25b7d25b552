//! Soft-label training from crowd annotations.
//!
//! When many annotators label the same item, their disagreement is signal:
//! instead of reducing each item to a single gold class, this crate estimates
//! a distribution over classes per item and fine-tunes classifiers against
//! those distributions.
//!
//! The pieces, bottom up:
//!
//! - [`label_core`] — validated probability vectors, entropy, KL divergence,
//!   binary collapse.
//! - [`crowd`] — annotation aggregation into soft labels, Fleiss' kappa,
//!   gold-agreement histograms, and label-budget curves.
//! - [`dataset`] — hashed bag-of-words featurization, dataset loaders,
//!   hardening, and the CLE / AOC baseline constructions.
//! - [`synth`] — seeded synthetic populations: items with true label
//!   distributions, correlated features, and simulated noisy annotators.
//! - [`model`] — linear and one-hidden-layer softmax classifiers with exact
//!   gradients for cross-entropy and squared-error losses over distribution
//!   targets.
//! - [`schedule`] — training orchestration: traditional hard-label training
//!   plus the interspersed (SLMG-I) and sequential (SLMG-S) soft fine-tuning
//!   schedules, and the experiment runner.
//! - [`eval`] — accuracy, confusion matrices, binary collapse, and
//!   calibration against reference distributions.
//! - [`cli`] — the `slmg` command-line tool built from the above.
//!
//! Every random procedure takes an explicit seed and derives substreams
//! through [`rng`], so populations, splits, and training runs reproduce
//! bit-for-bit.
//!
//! Start with the runnable examples (`cargo run -p slmg --example <name>`):
//! each one walks a single capability end to end. See the repository README
//! for the list.

pub mod cli;
pub mod crowd;
pub mod dataset;
pub mod error;
pub mod eval;
mod jsonl;
pub mod label_core;
pub mod model;
pub mod rng;
pub mod schedule;
pub mod synth;

pub use error::{Error, Result};
pub use label_core::{ClassLabel, LabelDistribution};
