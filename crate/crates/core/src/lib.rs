//! Shapley-value auditing under background-sample manipulation: exact
//! interventional Shapley values, optimal-transport reweighting of the
//! background, the audit-side detector and the attack itself.

pub mod attack;
pub mod cache;
pub mod data;
pub mod detection;
pub mod error;
pub mod model;
pub mod rng;
pub mod shapley;
pub mod transport;

pub use error::{Error, Result};
pub use model::{Model, ModelSpec};
