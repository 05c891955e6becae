//! Alpha-stable laws and Bayesian estimation of their parameters.

pub mod abc;
pub mod cf;
pub mod error;
pub mod experiments;
pub mod mh;
pub mod npmc;
pub mod observations;
pub mod params;
pub mod pdf;
pub mod proposal;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
pub use params::{ParamBox, StableParams};
