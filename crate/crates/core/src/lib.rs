//! Constrained linear MPC whose prediction model is corrected online by a
//! sinusoidal-dither extremum-seeking learner, with a DC servo benchmark.

pub mod error;
pub mod learner;
pub mod lti;
pub mod mes;
pub mod mpc;
pub mod qp;
pub mod servo;

pub use error::{Error, Result};
