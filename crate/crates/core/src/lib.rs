//! Coverage and capacity optimization for cellular networks.
//!
//! The crate bundles a deterministic link-budget simulator
//! ([`netgen`], [`radio`], [`metrics`]) with a sample-efficient optimizer
//! that steers differential evolution through per-UE Gaussian process
//! surrogates ([`gpr`], [`optimizer`]), reference baselines
//! ([`baselines`]), and an experiment driver with CSV artifacts
//! ([`experiment`]).

pub mod baselines;
pub mod error;
pub mod experiment;
pub mod gpr;
pub mod metrics;
pub mod netgen;
pub mod optimizer;
pub mod radio;

pub use error::{Error, Result};
