//! Inductive-bias estimation from sampled hypotheses.
//!
//! Hypotheses come from either an interpolating RBF-kernel posterior
//! ([`gp`]) or independently trained MLPs ([`nn`]). Their test losses are
//! modelled as a scaled non-central χ² ([`loss`]) whose log-CDF at the target
//! error gives the bias in nats or bits.

pub mod dataset;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod loss;
pub mod nn;
pub mod pipeline;
pub mod samples;
pub mod tasks;

pub use error::{Error, Result};
