//! Pessimistic Bayesian agents that defer to a mentor.
//!
//! The agent keeps exact posteriors over a class of history-based
//! world-models and a class of mentor-models, restricts planning to the
//! smallest top-posterior set of world-models with mass above `beta`, and
//! maximizes the worst-case value over that set. It hands control to the
//! mentor when a Thompson-sampled estimate of the mentor's value beats the
//! pessimistic value plus noise, or when the pessimistic value is zero.

pub mod agent;
pub mod belief;
pub mod dist;
pub mod envs;
pub mod error;
pub mod harness;
pub mod history;
pub mod models;
pub mod planner;
pub mod rng;
pub mod spaces;

pub use error::{Error, Result};
