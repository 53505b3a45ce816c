//! Simulation library for online classification of strategic agents
//! under one-sided (apple-tasting) and bandit feedback.

pub mod agent;
pub mod algo;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod harness;
pub mod linalg;

pub use error::{Error, Result};
