//! Rank-list sensitivity auditing for sequential recommenders.
//!
//! The crate measures how much the full item rankings produced by a
//! sequential recommender change when a single training interaction is
//! deleted, replaced, or inserted. The pieces are:
//!
//! * [`dataset`]: interaction logs, filtering, the per-user temporal split,
//!   popularity, and a seeded synthetic log generator.
//! * [`metrics`]: rank-biased overlap, top-K Jaccard, MRR / Recall@K,
//!   stability aggregation, and the Wilcoxon signed-rank test.
//! * [`idag`]: the interaction dependency DAG and cascading scores used to
//!   pick the edit with the widest downstream reach.
//! * [`perturb`]: target-selection strategies and the three minimal edits.
//! * [`model`]: a deterministic online reference recommender.
//! * [`harness`]: the end-to-end measurement protocol and report writers.
//! * [`cli`]: the `rankstab` command-line front end.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod idag;
pub mod metrics;
pub mod model;
pub mod perturb;
pub mod rng;

pub use error::{Error, Result};
