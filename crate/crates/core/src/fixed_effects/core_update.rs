//! Updates of the core coefficient tables and the smoothness variances.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{location_log_prior, member_sets, slot_prior, LabelSet};
use crate::adaptive::AdaptiveScale;
use crate::data::Dataset;
use crate::model::{accumulator_term, ModelState, BOUNDARY, DRIFT};
use crate::normal::{half_cauchy_log_density, normal_log_density};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreUpdateOptions {
    pub prior_only: bool,
    /// Power applied to the likelihood ratio of prior-proposal moves.
    pub temperature: f64,
}

impl Default for CoreUpdateOptions {
    fn default() -> Self {
        Self {
            prior_only: false,
            temperature: 1.0,
        }
    }
}

/// Log-likelihood of the trial terms that depend on slot `(k, z)`, at the
/// current slot value and at `prop`.
pub fn slot_log_lik_pair(state: &ModelState, ds: &Dataset, k: usize, z: usize, prop: [f64; 2]) -> (f64, f64) {
    let dims = state.dims;
    let d0 = dims.n_categories;
    let cur = [state.core.get(DRIFT, k, z), state.core.get(BOUNDARY, k, z)];
    let delta = [prop[0] - cur[0], prop[1] - cur[1]];
    let (mut lc, mut lp) = (0.0, 0.0);
    let blocks = [k.checked_sub(1), (k < dims.n_blocks).then_some(k)];
    for t in blocks.into_iter().flatten() {
        let w = if t + 1 == k { state.weights[t][1] } else { state.weights[t][0] };
        if w == 0.0 {
            continue;
        }
        for s in 0..d0 {
            for d in 0..d0 {
                if state.latent.get(k, dims.combo(s, d)) != z {
                    continue;
                }
                for &idx in ds.trials_of_block_stimulus(t, s) {
                    let r = &ds.records()[idx];
                    let u = r.rt - state.offset(r.subject, s);
                    let m = state.log_param(DRIFT, r.subject, t, s, d);
                    let b = state.log_param(BOUNDARY, r.subject, t, s, d);
                    let win = r.response == d;
                    lc += accumulator_term(u, m, b, win);
                    lp += accumulator_term(u, m + w * delta[0], b + w * delta[1], win);
                }
            }
        }
    }
    (lc, lp)
}

fn downstream_prior(state: &ModelState, k: usize, sets_next: Option<&[LabelSet]>) -> f64 {
    match sets_next {
        Some(sets) => location_log_prior(&state.core, &state.priors, &state.smoothness, k + 1, sets),
        None => 0.0,
    }
}

/// One sweep over all slots of the core tables.
///
/// Unoccupied slots are drawn exactly from their prior. Occupied slots at
/// `k >= 1` first get an independence proposal from their own conditional
/// prior, accepted on the likelihood ratio times the change in the next
/// location's prior. Every occupied slot then gets a joint Gaussian random-walk
/// move on `(β*_μ, β*_b)` with the shared adaptive scale.
pub fn update_core_coeffs<R: Rng + ?Sized>(
    state: &mut ModelState,
    ds: &Dataset,
    scale: &mut AdaptiveScale,
    opts: CoreUpdateOptions,
    rng: &mut R,
) {
    let dims = state.dims;
    let (kn, zz) = (dims.n_basis, dims.z_max);
    let loglik = |state: &ModelState, k: usize, z: usize, prop: [f64; 2]| {
        if opts.prior_only {
            (0.0, 0.0)
        } else {
            slot_log_lik_pair(state, ds, k, z, prop)
        }
    };
    for k in 0..kn {
        let sets = member_sets(&state.latent, zz, k, None);
        let sets_next = (k + 1 < kn).then(|| member_sets(&state.latent, zz, k + 1, None));
        for z in 0..zz {
            if sets[z].is_empty() {
                for p in [DRIFT, BOUNDARY] {
                    let e: f64 = rng.sample(StandardNormal);
                    let v = state.priors.mu0[p] + state.priors.unassigned_var.sqrt() * e;
                    state.core.set(p, k, z, v);
                }
                continue;
            }
            let cur = [state.core.get(DRIFT, k, z), state.core.get(BOUNDARY, k, z)];

            if k >= 1 {
                let mut prop = [0.0; 2];
                for p in [DRIFT, BOUNDARY] {
                    let (m, v) = slot_prior(&state.core, &state.priors, &state.smoothness, p, k, &sets[z]);
                    let e: f64 = rng.sample(StandardNormal);
                    prop[p] = m + v.sqrt() * e;
                }
                let (lc, lp) = loglik(state, k, z, prop);
                let down_c = downstream_prior(state, k, sets_next.as_deref());
                state.core.set(DRIFT, k, z, prop[0]);
                state.core.set(BOUNDARY, k, z, prop[1]);
                let down_p = downstream_prior(state, k, sets_next.as_deref());
                let log_ratio = opts.temperature * (lp - lc) + down_p - down_c;
                if !(rng.random::<f64>().ln() < log_ratio) {
                    state.core.set(DRIFT, k, z, cur[0]);
                    state.core.set(BOUNDARY, k, z, cur[1]);
                }
            }

            let cur = [state.core.get(DRIFT, k, z), state.core.get(BOUNDARY, k, z)];
            let sd = scale.scale();
            let e0: f64 = rng.sample(StandardNormal);
            let e1: f64 = rng.sample(StandardNormal);
            let prop = [cur[0] + sd * e0, cur[1] + sd * e1];
            let (lc, lp) = loglik(state, k, z, prop);
            let own_c = location_log_prior(&state.core, &state.priors, &state.smoothness, k, &sets)
                + downstream_prior(state, k, sets_next.as_deref());
            state.core.set(DRIFT, k, z, prop[0]);
            state.core.set(BOUNDARY, k, z, prop[1]);
            let own_p = location_log_prior(&state.core, &state.priors, &state.smoothness, k, &sets)
                + downstream_prior(state, k, sets_next.as_deref());
            let accepted = rng.random::<f64>().ln() < lp - lc + own_p - own_c;
            if !accepted {
                state.core.set(DRIFT, k, z, cur[0]);
                state.core.set(BOUNDARY, k, z, cur[1]);
            }
            scale.record(accepted);
        }
    }
}

/// Log of the part of the core prior that involves `σ²_{β,1}` for parameter
/// `p`, evaluated at `var`, times the half-Cauchy prior on `var`.
pub fn smoothness_log_target(state: &ModelState, p: usize, var: f64) -> f64 {
    if !(var > 0.0) {
        return f64::NEG_INFINITY;
    }
    let dims = state.dims;
    let mut lp = half_cauchy_log_density(var, 1.0);
    for k in 1..dims.n_basis {
        let sets = member_sets(&state.latent, dims.z_max, k, None);
        for (z, set) in sets.iter().enumerate() {
            if set.is_empty() {
                continue;
            }
            let mean = set.iter().map(|j| state.core.get(p, k - 1, j)).sum::<f64>() / set.len() as f64;
            lp += normal_log_density(state.core.get(p, k, z), mean, var / set.len() as f64);
        }
    }
    lp
}

/// Log-normal random-walk updates of the drift and boundary smoothness variances.
pub fn update_smoothness<R: Rng + ?Sized>(state: &mut ModelState, scales: &mut [AdaptiveScale; 2], rng: &mut R) {
    for p in [DRIFT, BOUNDARY] {
        let cur = state.smoothness[p];
        let e: f64 = rng.sample(StandardNormal);
        let prop = cur * (scales[p].scale() * e).exp();
        let log_ratio = smoothness_log_target(state, p, prop) + prop.ln() - smoothness_log_target(state, p, cur) - cur.ln();
        let accepted = rng.random::<f64>().ln() < log_ratio;
        if accepted {
            state.smoothness[p] = prop;
        }
        scales[p].record(accepted);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed_effects::smoothness_log_prior;
    use crate::model::test_support::toy_state;
    use crate::random::task_rng;

    #[test]
    fn slot_likelihood_matches_full_recompute() {
        let st = toy_state(2, 3, 2, 2);
        let mut recs = Vec::new();
        let mut rng = task_rng(3, 0);
        for i in 0..2 {
            for t in 0..3 {
                for l in 0..8 {
                    recs.push(crate::data::TrialRecord {
                        subject: i,
                        block: t,
                        trial: l,
                        stimulus: l % 2,
                        response: rng.random_range(0..2),
                        rt: 0.2 + rng.random::<f64>(),
                    });
                }
            }
        }
        let ds = Dataset::new(recs, Default::default()).unwrap();
        for k in 0..4 {
            for z in 0..2 {
                let prop = [0.4, -0.3];
                let (lc, lp) = slot_log_lik_pair(&st, &ds, k, z, prop);
                let full_c = st.log_likelihood(&ds);
                let mut st2 = st.clone();
                st2.core.set(DRIFT, k, z, prop[0]);
                st2.core.set(BOUNDARY, k, z, prop[1]);
                let full_p = st2.log_likelihood(&ds);
                assert!(((lp - lc) - (full_p - full_c)).abs() < 1e-9, "k={k} z={z}");
            }
        }
    }

    #[test]
    fn smoothness_target_differences_match_full_prior() {
        let st = toy_state(1, 4, 2, 3);
        let full = |v: f64| {
            let s = [v, st.smoothness[1]];
            smoothness_log_prior(&st.core, &st.latent, &st.priors, &s) + half_cauchy_log_density(v, 1.0)
        };
        let a = smoothness_log_target(&st, DRIFT, 0.7) - smoothness_log_target(&st, DRIFT, 2.0);
        let b = full(0.7) - full(2.0);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn unassigned_slots_follow_prior() {
        let mut st = toy_state(1, 2, 2, 4);
        // only labels 0 and 1 occupied
        for v in st.latent.labels.iter_mut() {
            *v %= 2;
        }
        let ds = Dataset::empty(1, 2, 2, 1.0).unwrap();
        let mut scale = AdaptiveScale::new(0.5);
        let mut rng = task_rng(9, 0);
        let n = 100_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            update_core_coeffs(&mut st, &ds, &mut scale, CoreUpdateOptions { prior_only: true, temperature: 1.0 }, &mut rng);
            let v = st.core.get(DRIFT, 1, 3);
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - st.priors.mu0[0]).abs() < 0.02 * 2.0);
        assert!((var - 4.0).abs() < 0.02 * 4.0);
    }
}
