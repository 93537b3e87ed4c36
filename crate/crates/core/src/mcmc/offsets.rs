//! Offset (non-decision time) updates.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::adaptive::AdaptiveScale;
use crate::data::Dataset;
use crate::model::{accumulator_term, ModelState, BOUNDARY, DRIFT};
use crate::random::task_rng;

/// Log-likelihood of the trials of subject `i` under stimulus `s` with offset `delta`.
pub fn offset_log_lik(state: &ModelState, ds: &Dataset, i: usize, s: usize, delta: f64) -> f64 {
    let d0 = state.dims.n_categories;
    let mut ll = 0.0;
    for &idx in ds.trials_of_subject_stimulus(i, s) {
        let r = &ds.records()[idx];
        let u = r.rt - delta;
        if u <= 0.0 {
            return f64::NEG_INFINITY;
        }
        for d in 0..d0 {
            let m = state.log_param(DRIFT, i, r.block, s, d);
            let b = state.log_param(BOUNDARY, i, r.block, s, d);
            ll += accumulator_term(u, m, b, d == r.response);
        }
    }
    ll
}

/// Log-normal random-walk step for every `δ_s^{(i)}` under its flat prior on
/// `(0, min rt)`. Pairs run in parallel on streams derived from `seed`.
pub fn update_offsets(state: &mut ModelState, ds: &Dataset, scales: &mut [AdaptiveScale], prior_only: bool, seed: u64) {
    let d0 = state.dims.n_categories;
    let st: &ModelState = state;
    let results: Vec<(f64, bool)> = scales
        .par_iter()
        .enumerate()
        .map(|(j, sc)| {
            let (i, s) = (j / d0, j % d0);
            let mut rng = task_rng(seed, j as u64);
            let cur = st.offsets[j];
            let e: f64 = rng.sample(StandardNormal);
            let prop = cur * (sc.scale() * e).exp();
            let bound = ds.min_rt(i, s).unwrap_or(f64::INFINITY);
            if !(prop > 0.0 && prop < bound) {
                return (cur, false);
            }
            let ll = if prior_only {
                0.0
            } else {
                offset_log_lik(st, ds, i, s, prop) - offset_log_lik(st, ds, i, s, cur)
            };
            let log_ratio = ll + prop.ln() - cur.ln();
            if rng.random::<f64>().ln() < log_ratio {
                (prop, true)
            } else {
                (cur, false)
            }
        })
        .collect();
    for (j, (v, acc)) in results.into_iter().enumerate() {
        state.offsets[j] = v;
        scales[j].record(acc);
    }
}
