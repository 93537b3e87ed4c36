//! Locally clustered fixed effects: latent state sequences, shared core
//! coefficients, their smoothness prior and the samplers acting on them.

pub mod core_update;
pub mod hamming;
pub mod latent;
pub mod transitions;

pub use core_update::{update_core_coeffs, update_smoothness, CoreUpdateOptions};
pub use hamming::hamming_ball;
pub use latent::{
    block_emission_log_lik, sample_latent_states, stimulus_emissions, LatentSamplerOptions, StimulusEmissions,
};
pub use transitions::{transition_counts, update_concentration, update_transitions};

use crate::model::{CoreCoefficients, LatentStateMatrix, PriorConstants, BOUNDARY, DRIFT};
use crate::normal::normal_log_density;

/// Expressed drift and boundary coefficient vectors of combination `x`.
pub fn expressed_coeffs(z: &LatentStateMatrix, core: &CoreCoefficients, x: usize) -> [Vec<f64>; 2] {
    let pick = |p: usize| (0..core.n_basis).map(|k| core.get(p, k, z.get(k, x))).collect();
    [pick(DRIFT), pick(BOUNDARY)]
}

/// Small bitset over state labels (`z_max <= 256`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelSet([u64; 4]);

impl LabelSet {
    #[inline]
    pub fn insert(&mut self, z: usize) {
        self.0[z >> 6] |= 1u64 << (z & 63);
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0 == [0; 4]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64).filter(move |b| bits >> b & 1 == 1).map(move |b| w * 64 + b)
        })
    }
}

/// Per-label member sets at location `k`. For `k >= 1` the set of label `z`
/// holds the distinct predecessor labels `z_{k-1}^{(x)}` of all combinations
/// with `z_k^{(x)} = z`. At `k = 0` a set is nonempty exactly when the label is occupied.
pub fn member_sets(z: &LatentStateMatrix, z_max: usize, k: usize, skip: Option<std::ops::Range<usize>>) -> Vec<LabelSet> {
    let mut sets = vec![LabelSet::default(); z_max];
    for x in 0..z.n_combos {
        if skip.as_ref().is_some_and(|r| r.contains(&x)) {
            continue;
        }
        let pred = if k == 0 { 0 } else { z.get(k - 1, x) };
        sets[z.get(k, x)].insert(pred);
    }
    sets
}

/// Mean of `β*_{k-1, j}` over `j` in `set`.
#[inline]
fn predecessor_mean(core: &CoreCoefficients, p: usize, k: usize, set: &LabelSet) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for j in set.iter() {
        sum += core.get(p, k - 1, j);
        n += 1;
    }
    sum / n as f64
}

/// Conditional prior `(mean, variance)` of slot `(k, z)` for parameter `p`.
pub fn slot_prior(
    core: &CoreCoefficients,
    priors: &PriorConstants,
    smoothness: &[f64; 2],
    p: usize,
    k: usize,
    set: &LabelSet,
) -> (f64, f64) {
    if set.is_empty() {
        (priors.mu0[p], priors.unassigned_var)
    } else if k == 0 {
        (priors.mu0[p], priors.initial_var)
    } else {
        (predecessor_mean(core, p, k, set), smoothness[p] / set.len() as f64)
    }
}

/// Log prior of all core coefficients at location `k` given the member sets.
pub fn location_log_prior(
    core: &CoreCoefficients,
    priors: &PriorConstants,
    smoothness: &[f64; 2],
    k: usize,
    sets: &[LabelSet],
) -> f64 {
    let mut total = 0.0;
    for (z, set) in sets.iter().enumerate() {
        for p in [DRIFT, BOUNDARY] {
            let (m, v) = slot_prior(core, priors, smoothness, p, k, set);
            total += normal_log_density(core.get(p, k, z), m, v);
        }
    }
    total
}

/// Joint log prior of the core coefficients given the latent states.
///
/// Each occupied slot at `k >= 1` is centred on the average of its distinct
/// predecessor coefficients with variance `σ²_{β,1} / |J|`. Unoccupied slots
/// follow `N(μ_{β,0}, σ²_{β,0})` and occupied slots at the first location
/// follow the wide `N(μ_{β,0}, initial_var)`.
pub fn smoothness_log_prior(
    core: &CoreCoefficients,
    z: &LatentStateMatrix,
    priors: &PriorConstants,
    smoothness: &[f64; 2],
) -> f64 {
    (0..core.n_basis)
        .map(|k| location_log_prior(core, priors, smoothness, k, &member_sets(z, core.z_max, k, None)))
        .sum()
}
