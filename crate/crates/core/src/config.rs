//! Sampler configuration, stored as TOML in every run directory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Weighting applied to local likelihoods when drawing the auxiliary pivot
/// of the latent-state sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Balancing {
    #[default]
    Sqrt,
    Identity,
    /// Plain Hamming ball sampler: pivot drawn uniformly.
    Uniform,
}

impl Balancing {
    /// Exponent `γ` with `g(p) = p^γ`.
    pub fn exponent(self) -> f64 {
        match self {
            Balancing::Sqrt => 0.5,
            Balancing::Identity => 1.0,
            Balancing::Uniform => 0.0,
        }
    }
}

/// Which parameter blocks the sweep updates. Disabled blocks stay at their current values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpdateMask {
    pub offsets: bool,
    pub core: bool,
    pub latent: bool,
    pub transitions: bool,
    pub concentration: bool,
    pub smoothness: bool,
    pub re_coeffs: bool,
    pub re_variances: bool,
}

impl Default for UpdateMask {
    fn default() -> Self {
        Self::all()
    }
}

impl UpdateMask {
    pub fn all() -> Self {
        Self {
            offsets: true,
            core: true,
            latent: true,
            transitions: true,
            concentration: true,
            smoothness: true,
            re_coeffs: true,
            re_variances: true,
        }
    }

    pub fn none() -> Self {
        Self {
            offsets: false,
            core: false,
            latent: false,
            transitions: false,
            concentration: false,
            smoothness: false,
            re_coeffs: false,
            re_variances: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of spline basis functions; must equal `T + 1` when set.
    pub n_basis: Option<usize>,
    pub z_max: usize,
    pub hamming_radius: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub batch_size: usize,
    pub target_acceptance: f64,
    pub a_alpha: f64,
    pub b_alpha: f64,
    pub seed: u64,
    pub balancing: Balancing,
    /// Likelihood tempering ladder for core-coefficient proposals during burn-in.
    pub tempering: bool,
    pub checkpoint_every: usize,
    /// Ignore the likelihood and sample the prior.
    pub prior_only: bool,
    pub unassigned_prior_var: f64,
    pub initial_prior_var: f64,
    pub updates: UpdateMask,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_basis: None,
            z_max: 8,
            hamming_radius: 1,
            iterations: 5000,
            burn_in: 2000,
            thin: 5,
            batch_size: 50,
            target_acceptance: 0.44,
            a_alpha: 1.0,
            b_alpha: 1.0,
            seed: 1,
            balancing: Balancing::Sqrt,
            tempering: false,
            checkpoint_every: 500,
            prior_only: false,
            unassigned_prior_var: 4.0,
            initial_prior_var: 1e6,
            updates: UpdateMask::all(),
        }
    }
}

impl ModelConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Number of thinned draws a full run stores.
    pub fn stored_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    /// Checks the configuration against itself and against the dataset design.
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        let d0 = ds.n_categories();
        let t = ds.n_blocks();
        let bad = |m: String| Err(Error::Config(m));
        if t < 2 {
            return bad(format!("at least 2 blocks are required, data has {t}"));
        }
        if let Some(k) = self.n_basis {
            if k != t + 1 {
                return bad(format!("n_basis must equal T + 1 = {}, got {k}", t + 1));
            }
        }
        if self.z_max == 0 || self.z_max > d0 * d0 || self.z_max > u8::MAX as usize {
            return bad(format!("z_max must lie in 1..={} (d0²), got {}", (d0 * d0).min(255), self.z_max));
        }
        if self.hamming_radius > d0 {
            return bad(format!("hamming_radius {} exceeds d0 = {d0}", self.hamming_radius));
        }
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return bad(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            ));
        }
        if self.thin == 0 || self.batch_size == 0 {
            return bad("thin and batch_size must be positive".into());
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return bad(format!("target_acceptance must lie in (0, 1), got {}", self.target_acceptance));
        }
        if !(self.a_alpha > 0.0 && self.b_alpha > 0.0) {
            return bad("a_alpha and b_alpha must be positive".into());
        }
        if !(self.unassigned_prior_var > 0.0 && self.initial_prior_var > 0.0) {
            return bad("prior variances must be positive".into());
        }
        Ok(())
    }
}
