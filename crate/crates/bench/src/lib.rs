//! Experiment harness for the geoaccel solvers: configuration files, runs
//! with CSV traces, accuracy sweeps, rate fits and the property suites.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod anchors;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod problem;
pub mod sweep;
pub mod verify;
