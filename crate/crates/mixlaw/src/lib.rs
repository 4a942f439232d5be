//! Scaling laws for data-constrained pretraining mixtures.
//!
//! When the target domain's corpus is small, part of the training budget
//! repeats it. Loss then depends on three coupled quantities: the mixture
//! weight h given to the target domain, the total budget, and the repetition
//! factor r the weight implies for the target pool. This crate fits laws
//! that make repeated tokens count as a saturating amount of effective data,
//! evaluates them against measured loss surfaces, and turns a fitted law
//! into a mixture-weight plan for the next run.
//!
//! The pieces compose in that order: [`model`] and [`baselines`] define the
//! functional forms, [`fitting`] estimates parameters with a reweighted
//! Huber objective, [`metrics`] scores predictions on empirical surfaces,
//! [`planner`] optimizes h for future budgets, and [`io`] holds the file
//! formats the CLI speaks. Everything downstream of data loading is
//! deterministic for a fixed seed, including across thread counts.

pub mod baselines;
pub mod error;
pub mod fitting;
pub mod io;
pub mod law;
pub mod metrics;
pub mod model;
pub mod planner;

pub use error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
