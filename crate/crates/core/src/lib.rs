//! Approximate maximum-likelihood selective inference after randomized
//! convex queries (lasso, marginal screening, SLOPE).

pub mod error;
pub mod filedrawer;
pub mod linalg;
pub mod mle;
pub mod multi;
pub mod normal;
pub mod queries;
pub mod rng;
pub mod simulation;
pub mod stats;

pub use error::{Error, Result};
