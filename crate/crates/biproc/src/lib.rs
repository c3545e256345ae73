//! Sequential sampling from a birth process with immigration.
//!
//! Families arrive at Poisson rate θ; each individual independently gives
//! birth at rate 1. This crate pairs the exact distribution theory of the
//! number of families observable in consecutive time windows — Poisson
//! window counts, their covariances, expected sample variances, the
//! count-matched multi-sample design and its large-sample limit, gap-time
//! laws, and the sampling-formula/sequential-arrival embedding — with an
//! event-driven Monte Carlo simulator that independently verifies every
//! closed form.
//!
//! Modules:
//! - [`distributions`]: scalar laws (family size, population size,
//!   log-series, polylogarithms).
//! - [`interval`]: window observability means, covariances, sample
//!   variance, estimators and gap-time moments.
//! - [`esf`]: the sampling formula over counts-of-counts, sequential
//!   arrival sampling, and Poisson conditioning checks.
//! - [`simulator`]: exact event-driven trajectories, window counters,
//!   jump-chain extraction, and the conditioned embedding check.
//! - [`montecarlo`]: the replicated experiment harness with named
//!   verification targets behind a runtime registry.

// validation guards use the `!(x > 0.0)` form deliberately: unlike
// `x <= 0.0` it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod esf;
pub mod interval;
pub mod montecarlo;
mod numeric;
pub mod simulator;
pub mod stats;

pub use distributions::{LogSeriesLaw, ModelParams};
pub use error::{Error, Result};
pub use interval::{Interval, SampleSizes, TimeGrid};
