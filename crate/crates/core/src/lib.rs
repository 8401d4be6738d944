//! Respondent-driven sampling under multivariate differential recruitment.
//!
//! The crate simulates homophilous populations, draws RDS samples under
//! random, differential (DR) or multivariate differential (MDR)
//! recruitment, fits the MDR model by maximum likelihood, and computes
//! prevalence estimators with bootstrap uncertainty.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod inference;
pub mod io;
pub mod netgen;
pub mod optim;
pub mod population;
pub mod recruitment;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
