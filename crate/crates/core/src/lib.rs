//! Goodness-of-fit tests for approximate Bayesian computation.
//!
//! Two test statistics measure how far observed summary statistics sit from
//! what a model simulates:
//!
//! * `D_prior`: mean scaled distance to the simulations accepted by the
//!   rejection algorithm ([`gof::gfit`]);
//! * `D_post`: mean scaled distance to statistics simulated from
//!   regression-adjusted posterior draws ([`gof::gfit_post`]).
//!
//! Their null distributions come from pseudo-observed datasets drawn from
//! the reference table itself. The crate also provides posterior predictive
//! checks ([`ppc`]), a PCA envelope diagnostic ([`pca`]), built-in
//! simulators ([`sim`]) and a type I error / power harness ([`harness`]).

pub mod adjust;
pub mod error;
pub mod gof;
pub mod harness;
pub mod pca;
pub mod ppc;
pub mod rejection;
pub mod rng;
pub mod scaling;
pub mod sim;
pub mod table;

pub use error::{Error, Result};
pub use gof::{d_post, d_prior, gfit, gfit_post, p_value, GofResult, StatisticKind};
pub use rng::Seed;
pub use scaling::{distance, fit_scaling, mad, ScalingVector};
pub use sim::Simulator;
pub use table::{load_observed, load_reference_table, ObservedStats, ReferenceTable};
