//! Metropolis-within-Gibbs engine.
//!
//! One sweep updates, in order: offsets, core coefficients, latent states,
//! transition rows, concentrations, smoothness variances, random-effect
//! coefficients and random-effect variances. Proposal scales adapt in batches
//! during burn-in and are frozen afterwards. The master generator is a
//! seeded ChaCha8 stream; parallel updates draw one seed from it per sweep and
//! derive a private stream per task, so results do not depend on the number
//! of threads.

pub mod init;
pub mod offsets;
pub mod store;

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::AdaptiveScale;
use crate::config::ModelConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fixed_effects::{
    sample_latent_states, stimulus_emissions, transition_counts, update_concentration, update_core_coeffs,
    update_smoothness, update_transitions, CoreUpdateOptions, LatentSamplerOptions,
};
use crate::model::ModelState;
use crate::posterior::{Draw, PosteriorDraws};
use crate::random_effects::{update_re_coeffs, update_re_variances, ReScales};

pub use init::init_state;
pub use store::{read_draws, read_meta, write_draws, Checkpoint, RunMeta};

const TEMPER_LADDER: [f64; 3] = [0.25, 0.5, 1.0];

/// Adaptive proposal scales of every random-walk block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleTable {
    pub offsets: Vec<AdaptiveScale>,
    pub core: AdaptiveScale,
    pub smoothness: [AdaptiveScale; 2],
    pub concentration: [AdaptiveScale; 2],
    pub re: ReScales,
    pub re_variances: [AdaptiveScale; 4],
}

impl ScaleTable {
    pub fn new(n_subjects: usize, n_categories: usize) -> Self {
        Self {
            offsets: vec![AdaptiveScale::new(0.1); n_subjects * n_categories],
            core: AdaptiveScale::new(0.1),
            smoothness: std::array::from_fn(|_| AdaptiveScale::new(1.0)),
            concentration: std::array::from_fn(|_| AdaptiveScale::new(1.0)),
            re: ReScales::new(n_subjects, 0.1),
            re_variances: std::array::from_fn(|_| AdaptiveScale::new(1.0)),
        }
    }

    pub fn end_batch(&mut self, target: f64, adapt: bool) {
        let singles = self
            .offsets
            .iter_mut()
            .chain(std::iter::once(&mut self.core))
            .chain(self.smoothness.iter_mut())
            .chain(self.concentration.iter_mut())
            .chain(self.re_variances.iter_mut());
        for s in singles {
            s.end_batch(target, adapt);
        }
        self.re.end_batch(target, adapt);
    }

    /// Overall acceptance rate of every update family.
    pub fn acceptance_summary(&self) -> BTreeMap<String, f64> {
        fn pooled<'a>(it: impl Iterator<Item = &'a AdaptiveScale>) -> f64 {
            let (a, t) = it.fold((0u64, 0u64), |(a, t), s| (a + s.accepted, t + s.tried));
            if t == 0 {
                f64::NAN
            } else {
                a as f64 / t as f64
            }
        }
        let mut m = BTreeMap::new();
        m.insert("offsets".into(), pooled(self.offsets.iter()));
        m.insert("core".into(), self.core.acceptance_rate());
        m.insert("smoothness_drift".into(), self.smoothness[0].acceptance_rate());
        m.insert("smoothness_boundary".into(), self.smoothness[1].acceptance_rate());
        m.insert("concentration_correct".into(), self.concentration[0].acceptance_rate());
        m.insert("concentration_incorrect".into(), self.concentration[1].acceptance_rate());
        m.insert("re_coeffs".into(), pooled(self.re.scales.iter()));
        m.insert("re_variances".into(), pooled(self.re_variances.iter()));
        m.retain(|_, v| v.is_finite());
        m
    }
}

/// A chain positioned at some iteration.
pub struct Sampler<'a> {
    ds: &'a Dataset,
    cfg: ModelConfig,
    state: ModelState,
    scales: ScaleTable,
    rng: ChaCha8Rng,
}

impl<'a> Sampler<'a> {
    /// Validates the configuration and starts from [`init_state`].
    pub fn new(ds: &'a Dataset, cfg: ModelConfig) -> Result<Self> {
        cfg.validate(ds)?;
        let state = init_state(ds, &cfg)?;
        Self::with_state(ds, cfg, state)
    }

    /// Starts from a caller-supplied state.
    pub fn with_state(ds: &'a Dataset, cfg: ModelConfig, state: ModelState) -> Result<Self> {
        cfg.validate(ds)?;
        state.check_invariants(ds)?;
        let scales = ScaleTable::new(state.dims.n_subjects, state.dims.n_categories);
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Self { ds, cfg, state, scales, rng })
    }

    fn from_checkpoint(ds: &'a Dataset, cp: Checkpoint) -> Result<(Self, Vec<Draw>, f64)> {
        cp.config.validate(ds)?;
        cp.state.check_invariants(ds)?;
        let s = Self {
            ds,
            cfg: cp.config,
            state: cp.state,
            scales: cp.scales,
            rng: cp.rng,
        };
        Ok((s, cp.draws, cp.elapsed_seconds))
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn scales(&self) -> &ScaleTable {
        &self.scales
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    fn latent_options(&self) -> LatentSamplerOptions {
        LatentSamplerOptions {
            radius: self.cfg.hamming_radius,
            gamma: self.cfg.balancing.exponent(),
        }
    }

    /// Runs one full sweep and returns the log-likelihood of the new state.
    pub fn sweep(&mut self) -> Result<f64> {
        let cfg = &self.cfg;
        let ds = self.ds;
        let mask = cfg.updates;
        let it = self.state.iteration;
        let adapting = it < cfg.burn_in;
        let prior_only = cfg.prior_only;

        if mask.offsets {
            let seed = self.rng.random();
            offsets::update_offsets(&mut self.state, ds, &mut self.scales.offsets, prior_only, seed);
        }
        if mask.core {
            let temperature = if cfg.tempering && adapting {
                TEMPER_LADDER[it % TEMPER_LADDER.len()]
            } else {
                1.0
            };
            let opts = CoreUpdateOptions { prior_only, temperature };
            update_core_coeffs(&mut self.state, ds, &mut self.scales.core, opts, &mut self.rng);
        }
        if mask.latent {
            let opts = self.latent_options();
            let tables: Vec<_> = (0..self.state.dims.n_categories)
                .map(|s| stimulus_emissions(&self.state, ds, s, prior_only))
                .collect();
            for (s, em) in tables.iter().enumerate() {
                sample_latent_states(s, &mut self.state, em, opts, &mut self.rng);
            }
        }
        if mask.transitions {
            let counts = transition_counts(&self.state.latent, &self.state.dims);
            update_transitions(&mut self.state.transitions, &counts, &mut self.rng);
        }
        if mask.concentration {
            update_concentration(
                &mut self.state.transitions,
                cfg.a_alpha,
                cfg.b_alpha,
                &mut self.scales.concentration,
                &mut self.rng,
            );
        }
        if mask.smoothness {
            update_smoothness(&mut self.state, &mut self.scales.smoothness, &mut self.rng);
        }
        if mask.re_coeffs {
            let seed = self.rng.random();
            update_re_coeffs(&mut self.state, ds, &mut self.scales.re, prior_only, seed);
        }
        if mask.re_variances {
            update_re_variances(&mut self.state, &mut self.scales.re_variances, &mut self.rng);
        }

        self.state.iteration += 1;
        if self.state.iteration.is_multiple_of(cfg.batch_size) {
            self.scales.end_batch(cfg.target_acceptance, self.state.iteration <= cfg.burn_in);
        }

        self.state
            .check_invariants(ds)
            .map_err(|e| Error::Numerical(format!("iteration {}: {e}", self.state.iteration)))?;
        let ll = self.state.log_likelihood(ds);
        if !prior_only && !ll.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite log-likelihood {ll} at iteration {}",
                self.state.iteration
            )));
        }
        Ok(ll)
    }
}

/// Where and how far to run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Run directory for config, checkpoints, draws and metadata.
    pub run_dir: Option<PathBuf>,
    /// Continue from `run_dir/checkpoint.json`.
    pub resume: bool,
    /// Stop once this many total iterations are done, as if interrupted.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub draws: PosteriorDraws,
    pub meta: RunMeta,
    pub state: ModelState,
}

/// Runs a chain in memory.
pub fn run_chain(ds: &Dataset, cfg: &ModelConfig) -> Result<RunOutput> {
    run_chain_with(ds, cfg, &RunOptions::default())
}

/// Runs a chain, optionally persisting to and resuming from a run directory.
pub fn run_chain_with(ds: &Dataset, cfg: &ModelConfig, opts: &RunOptions) -> Result<RunOutput> {
    let started = Instant::now();
    let (mut sampler, mut draws, elapsed_before) = if opts.resume {
        let dir = opts
            .run_dir
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("resuming needs a run directory".into()))?;
        let cp = store::load_checkpoint(dir)?;
        if cp.config != *cfg {
            return Err(Error::Config("checkpoint was written with a different configuration".into()));
        }
        log::info!("resuming from iteration {}", cp.state.iteration);
        Sampler::from_checkpoint(ds, cp)?
    } else {
        (Sampler::new(ds, cfg.clone())?, Vec::new(), 0.0)
    };

    if let Some(dir) = &opts.run_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if !opts.resume {
            store::write_atomic(&dir.join(store::CONFIG_FILE), cfg.to_toml_string().as_bytes())?;
        }
    }

    let elapsed = |before: f64| before + started.elapsed().as_secs_f64();
    while sampler.state.iteration < cfg.iterations {
        if opts.stop_after.is_some_and(|n| sampler.state.iteration >= n) {
            break;
        }
        let ll = match sampler.sweep() {
            Ok(ll) => ll,
            Err(e) => {
                if let Some(dir) = &opts.run_dir {
                    let snap = serde_json::to_vec(&sampler.state).map_err(|e| Error::Serialization(e.to_string()))?;
                    store::write_atomic(&dir.join("abort_state.json"), &snap)?;
                }
                return Err(e);
            }
        };
        let it = sampler.state.iteration;
        if it > cfg.burn_in && (it - cfg.burn_in).is_multiple_of(cfg.thin) {
            draws.push(Draw::from_state(&sampler.state, ll));
        }
        if it % 100 == 0 {
            log::debug!("iteration {it}, log-likelihood {ll:.3}");
        }
        if let Some(dir) = &opts.run_dir {
            if cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0 && it < cfg.iterations {
                let cp = Checkpoint {
                    config: sampler.cfg.clone(),
                    state: sampler.state.clone(),
                    rng: sampler.rng.clone(),
                    scales: sampler.scales.clone(),
                    draws: draws.clone(),
                    elapsed_seconds: elapsed(elapsed_before),
                };
                store::save_checkpoint(dir, &cp)?;
            }
        }
    }

    let completed = sampler.state.iteration >= cfg.iterations;
    let posterior = PosteriorDraws::new(sampler.state.dims, draws);
    let meta = RunMeta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        dims: sampler.state.dims,
        iterations_completed: sampler.state.iteration,
        stored_draws: posterior.len(),
        completed,
        acceptance: sampler.scales.acceptance_summary(),
        wall_time_seconds: elapsed(elapsed_before),
        config: cfg.clone(),
    };
    if let Some(dir) = &opts.run_dir {
        if completed {
            store::write_draws(dir, &posterior)?;
        }
        store::write_meta(dir, &meta)?;
    }
    Ok(RunOutput {
        draws: posterior,
        meta,
        state: sampler.state,
    })
}
