//! Bayesian longitudinal drift-diffusion mixed models for multi-alternative
//! choice and response-time data.
//!
//! Each trial is a race of inverse-Gaussian accumulators, one per response
//! category. Drift and boundary trajectories over training blocks are
//! quadratic B-splines whose coefficients switch between shared latent
//! states, plus subject-level functional random effects. Posterior inference
//! runs a Metropolis-within-Gibbs sampler with a locally informed
//! Hamming-ball update for the latent states.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod bspline;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod fixed_effects;
pub mod ig;
pub mod lba;
pub mod mcmc;
pub mod model;
pub mod normal;
pub mod posterior;
pub mod quadrature;
pub mod random;
pub mod random_effects;
pub mod simulator;
pub mod cli;

pub use config::ModelConfig;
pub use data::{load_dataset, Dataset, TrialRecord};
pub use error::{Error, Result};
pub use model::{Dims, ModelState};
pub use posterior::{Draw, PosteriorDraws};
