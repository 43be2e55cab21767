//! Imitation learning with test-time planning.

pub mod cli;
pub mod envs;
pub mod error;
pub mod harness;
pub mod imitation;
pub mod net;
pub mod perturb;
pub mod planner;
pub mod rng;

pub use error::{Error, Result};
