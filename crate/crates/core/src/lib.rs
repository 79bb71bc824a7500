//! Bayesian basket-trial design engine.
//!
//! A PPMx random-partition survival regression drives cohort-wise adaptive randomization
//! and a utility-maximizing report of the mutation–tumor subgroups that benefit from
//! targeted therapy. The [`simulator`] replicates whole trials to estimate operating
//! characteristics and to compare against pooled and per-mutation designs.

pub mod allocation;
pub mod decision;
pub mod domain;
pub mod error;
pub mod ppmx;
pub mod predictive;
pub mod roster;
pub mod seeds;
pub mod simulator;

pub use error::{Error, Result};
