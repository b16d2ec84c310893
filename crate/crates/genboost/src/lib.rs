//! Boosting generative models by chaining latent-variable meta-models.
//!
//! The crate provides three ways of combining weak generative models into a
//! stronger one:
//!
//! * **Chained boosting** ([`cascade`]): each model's visible variable is the
//!   previous model's hidden variable. The marginal likelihood of the chain
//!   admits a lower bound that decomposes into one term per layer, so layers
//!   can be trained separately and greedily, and the chain samples in a
//!   single top-down pass.
//! * **Multiplicative boosting** ([`multiplicative`]): an exponent-weighted
//!   geometric average of model densities, with importance-sampled partition
//!   estimates and Metropolis-Hastings sampling.
//! * **Hybrid boosting**: chains used as components of a multiplicative
//!   ensemble.
//!
//! A semi-supervised variant ([`semisup`]) puts a class variable in the top
//! model only and learns to classify without any classification loss. The
//! [`oracle`] module computes everything exactly on tiny discrete instances
//! by brute-force enumeration; the test suite leans on it heavily.

pub mod cascade;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod metamodel;
pub mod models;
pub mod multiplicative;
pub mod numerics;
pub mod oracle;
pub mod rng;
pub mod semisup;
pub mod serialize;
pub mod space;
pub mod train;

pub use error::{Error, Result};
pub use metamodel::{Family, LogLikEstimate, MetaModel};
pub use space::{Space, SpaceKind};
