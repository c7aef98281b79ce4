//! Graph-structured Bernoulli bandits.
//!
//! A set of arms is served to a set of users; the mean reward of arm `a` for
//! user `b` is unknown, but a known weight matrix bounds how much any arm's
//! mean can differ between two users. This crate provides
//!
//! - [`kl`]: Bernoulli KL divergence kernels,
//! - [`graph`]: weight matrices, configurations, validation and sampling,
//! - [`lp`]: the allocation LPs behind the structured regret lower bound,
//! - [`policy`]: IMED and its graph-structured variants,
//! - [`sim`]: the Bernoulli environment, run traces and batch aggregation.

pub mod graph;
pub mod kl;
pub mod lp;
pub mod policy;
pub mod rng;
pub mod sim;

pub use graph::{BanditConfig, WeightMatrix};

/// The bundled 5-arm, 10-user fixed configuration, as JSON.
pub const FIXED_CONFIG_JSON: &str = include_str!("../assets/fixed_10x5.json");

/// Parses [`FIXED_CONFIG_JSON`].
pub fn fixed_config() -> BanditConfig {
    BanditConfig::from_json(FIXED_CONFIG_JSON).expect("bundled configuration is well formed")
}
