//! Tabular maximum-likelihood inverse reinforcement learning.

pub mod demo;
pub mod env;
pub mod error;
pub mod estimators;
pub mod features;
pub mod harness;
pub mod irl;
pub mod linalg;
pub mod mdp;
pub mod oracle;

pub use error::{IrlError, Result};
