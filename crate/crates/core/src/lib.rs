//! Desk-scale simulator and training stack for pre-migrating compute tasks of
//! moving vehicles across road-side units (RSUs) and a cloud tier.
//!
//! The crate is organized around a pipeline:
//!
//! * [`world`] — geometry, RSU/vehicle specs, mobility (trace replay and
//!   synthetic routes), coverage membership, dwell times.
//! * [`latency`] — pure closed forms for every latency component of one
//!   vehicle-slot (upload, processing, migration, cloud spill, download).
//! * [`env`] — the multi-agent environment: observations, hybrid
//!   discrete+continuous actions, constraint enforcement, workload dynamics,
//!   per-agent rewards.
//! * [`numerics`] — a minimal reverse-mode autodiff kernel (dense layers, an
//!   LSTM cell, categorical/Beta sampling heads, Adam) used by both the
//!   forecaster and the policy learner.
//! * [`forecast`] — sliding-window trajectory datasets, the two-layer LSTM
//!   position predictor, and coverage-aware RSU workload prediction.
//! * [`mappo`] — hybrid-action multi-agent PPO with centralized critics.
//! * [`baselines`] — reference policies (greedy, random, full/no
//!   pre-migration) and an exhaustive single-slot oracle for small instances.
//! * [`scenario`] / [`experiment`] — config files, seeding, experiment cells,
//!   metric aggregation and plot-data export consumed by the CLI.

pub mod baselines;
pub mod env;
pub mod error;
pub mod experiment;
pub mod forecast;
pub mod latency;
pub mod mappo;
pub mod numerics;
pub mod parallel;
pub mod scenario;
pub mod units;
pub mod world;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
