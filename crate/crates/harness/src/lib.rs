//! Experiment driver for two-layer network surveys: configuration, seeded
//! Monte Carlo sweeps, the approximation-error study, jackknife sweeps,
//! ratio reports and the `fcnet` command line.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod report;
pub mod seeds;
