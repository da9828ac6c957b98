//! Bayesian estimation of panel models with time-varying network dependence.
//!
//! The measurement equation for unit `i` at event `t` is
//!
//! ```text
//! y_it = rho_t * sum_j w_ijt y_jt + alpha_it + x_it' beta_it + eps_it,   eps_it ~ N(0, sigma_i^2)
//! rho_t = rho_{t-1} + varsigma * xi_t
//! theta_it = theta_i0 + sqrt(Omega_i) * theta_tilde_it,  theta_tilde_it a standard random walk
//! ```
//!
//! The crate is organised along the estimation pipeline:
//!
//! * [`data_model`] domain types, model variants and input validation
//! * [`weights`] construction of network matrices from make/use tables
//! * [`ingest`] policy shocks, index normalization, correlation tables, file parsing
//! * [`sampler`] the five-step MCMC sweep
//! * [`impacts`] direct, indirect and total effects of a covariate
//! * [`clustering`] k-means / silhouette clustering of posterior effects
//! * [`synth`] simulation from the model's own data-generating process
//! * [`cli`] batch commands wiring everything together
//!
//! Data-parallel loops (units within a sweep, draws, replications) run on rayon when
//! the `parallel` feature is enabled and sequentially otherwise. Results are identical
//! either way: every parallel task draws from its own seeded random substream.

pub mod bundle;
pub mod cli;
pub mod clustering;
pub mod data_model;
pub mod error;
pub mod impacts;
pub mod ingest;
pub mod linalg;
pub mod par;
pub mod sampler;
pub mod stats;
pub mod synth;
pub mod weights;

pub use data_model::{
    ChainSchedule, DataShape, Heterogeneity, ModelConfig, NetworkMode, PanelData, ParameterState,
    PosteriorDraws, PriorSpec, Variant, WeightSequence,
};
pub use error::{Error, Result};
