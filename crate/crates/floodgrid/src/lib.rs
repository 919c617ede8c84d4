//! Substation hardening optimization against flood scenarios.
//!
//! The crate ingests a power grid and a set of per-substation flood depth
//! scenarios, builds stochastic (expected load shed) and robust (worst-case
//! load shed) two-stage hardening models with an embedded DC power flow
//! recourse, solves them with an in-repo branch-and-bound MILP engine, and
//! drives the surrounding analyses: budget sweeps with warm starts, value of
//! the stochastic solution and of perfect information, disaster-cost scaling,
//! optimal-budget search, and load-shed distributions.
//!
//! Modules:
//! - [`grid`]: network domain types, JSON ingestion, structural validation
//! - [`scenario`]: flood scenarios and derived quantities
//! - [`milp`]: generic MILP representation, solver, and MPS export
//! - [`formulations`]: translation of grid + scenarios into MILP instances
//! - [`analysis`]: plan evaluation, sweeps, bounds, histograms
//! - [`report`]: CSV writers and readers for the analysis outputs

pub mod analysis;
pub mod formulations;
pub mod grid;
pub mod milp;
pub mod report;
pub mod scenario;
