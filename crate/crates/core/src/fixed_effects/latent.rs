//! Locally informed Hamming ball sampler for the latent state sequences of one stimulus.
//!
//! For stimulus `s` the decisions `d = 0..d0` form the layers of a factorial
//! HMM over basis locations. Block `t` depends on the state vectors at
//! locations `t` and `t + 1`, and its log-likelihood splits into one term per
//! layer, which is tabulated once per sweep in [`StimulusEmissions`].
//!
//! One update draws an auxiliary pivot `v_k` inside the Hamming ball around
//! each current `z_k`, weighted by `g(p(y_k | v_k, z_{k+1}))`, then samples the
//! whole sequence exactly by backward messages and forward sampling restricted
//! to the balls around the pivots. The pivot normaliser is kept in the pair
//! potentials so the update leaves the conditional posterior invariant.

use rand::Rng;
use rayon::prelude::*;

use super::hamming::hamming_ball;
use super::{location_log_prior, member_sets, LabelSet};
use crate::data::Dataset;
use crate::model::{accumulator_term, family, ModelState, BOUNDARY, CORRECT, DRIFT, INCORRECT};
use crate::normal::log_sum_exp;
use crate::random::sample_log_categorical;

/// Per-layer block log-likelihood tables of one stimulus,
/// indexed `[((t * d0 + d) * z_max + z_t) * z_max + z_{t+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusEmissions {
    pub n_blocks: usize,
    pub d0: usize,
    pub z_max: usize,
    pub table: Vec<f64>,
}

impl StimulusEmissions {
    #[inline]
    pub fn get(&self, t: usize, d: usize, za: usize, zb: usize) -> f64 {
        self.table[((t * self.d0 + d) * self.z_max + za) * self.z_max + zb]
    }

    /// Block-`t` log-likelihood for state vectors `a` (location `t`) and `b` (location `t + 1`).
    #[inline]
    pub fn block(&self, t: usize, a: &[u8], b: &[u8]) -> f64 {
        let base = t * self.d0;
        let zz = self.z_max;
        let mut total = 0.0;
        for d in 0..self.d0 {
            total += self.table[((base + d) * zz + a[d] as usize) * zz + b[d] as usize];
        }
        total
    }
}

fn block_layer_table(state: &ModelState, ds: &Dataset, s: usize, t: usize, d: usize) -> Vec<f64> {
    let zz = state.dims.z_max;
    let mut out = vec![0.0; zz * zz];
    let trials = ds.trials_of_block_stimulus(t, s);
    if trials.is_empty() {
        return out;
    }
    let [w0, w1] = state.weights[t];
    let c = if d == s { CORRECT } else { INCORRECT };
    let prepared: Vec<(f64, f64, f64, bool)> = trials
        .iter()
        .map(|&idx| {
            let r = &ds.records()[idx];
            let u = r.rt - state.offset(r.subject, s);
            (
                u,
                state.re_log_param(r.subject, family(DRIFT, c), t),
                state.re_log_param(r.subject, family(BOUNDARY, c), t),
                r.response == d,
            )
        })
        .collect();
    let eval = |za: usize, zb: usize| {
        let fm = w0 * state.core.get(DRIFT, t, za) + w1 * state.core.get(DRIFT, t + 1, zb);
        let fb = w0 * state.core.get(BOUNDARY, t, za) + w1 * state.core.get(BOUNDARY, t + 1, zb);
        prepared
            .iter()
            .map(|&(u, rm, rb, win)| accumulator_term(u, fm + rm, fb + rb, win))
            .sum::<f64>()
    };
    if w1 == 0.0 {
        for za in 0..zz {
            let v = eval(za, 0);
            out[za * zz..(za + 1) * zz].fill(v);
        }
    } else if w0 == 0.0 {
        for zb in 0..zz {
            let v = eval(0, zb);
            for za in 0..zz {
                out[za * zz + zb] = v;
            }
        }
    } else {
        for za in 0..zz {
            for zb in 0..zz {
                out[za * zz + zb] = eval(za, zb);
            }
        }
    }
    out
}

/// Tabulates the layer log-likelihoods of stimulus `s` under the current
/// coefficients, offsets and random effects. All zeros when `prior_only`.
pub fn stimulus_emissions(state: &ModelState, ds: &Dataset, s: usize, prior_only: bool) -> StimulusEmissions {
    let dims = state.dims;
    let (t_n, d0, zz) = (dims.n_blocks, dims.n_categories, dims.z_max);
    let table = if prior_only {
        vec![0.0; t_n * d0 * zz * zz]
    } else {
        let parts: Vec<Vec<f64>> = (0..t_n * d0)
            .into_par_iter()
            .map(|j| block_layer_table(state, ds, s, j / d0, j % d0))
            .collect();
        parts.concat()
    };
    StimulusEmissions {
        n_blocks: t_n,
        d0,
        z_max: zz,
        table,
    }
}

/// Log-likelihood of the block-`k` trials of stimulus `s` when the state
/// vectors of that stimulus at locations `k` and `k + 1` are `zk` and `zk1`.
pub fn block_emission_log_lik(
    s: usize,
    k: usize,
    zk: &[u8],
    zk1: &[u8],
    state: &ModelState,
    ds: &Dataset,
) -> f64 {
    let mut st = state.clone();
    for d in 0..state.dims.n_categories {
        let x = state.dims.combo(s, d);
        st.latent.set(k, x, zk[d] as usize);
        st.latent.set(k + 1, x, zk1[d] as usize);
    }
    crate::ig::dataset_log_lik(ds, &st, Some(ds.trials_of_block_stimulus(k, s)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentSamplerOptions {
    pub radius: usize,
    /// Exponent `γ` of the balancing function `g(p) = p^γ`.
    pub gamma: f64,
}

#[inline]
fn balance(gamma: f64, loglik: f64) -> f64 {
    if gamma == 0.0 {
        0.0
    } else if loglik == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        gamma * loglik
    }
}

/// Column-prior evaluator for one stimulus: member sets contributed by all
/// other stimuli, to which the candidate vectors of this stimulus are added.
struct ColumnPrior<'a> {
    state: &'a ModelState,
    base: Vec<Vec<LabelSet>>,
}

impl<'a> ColumnPrior<'a> {
    fn new(state: &'a ModelState, s: usize) -> Self {
        let d0 = state.dims.n_categories;
        let own = s * d0..(s + 1) * d0;
        let base = (0..state.dims.n_basis)
            .map(|k| member_sets(&state.latent, state.dims.z_max, k, Some(own.clone())))
            .collect();
        Self { state, base }
    }

    fn initial(&self, a: &[u8]) -> f64 {
        let mut sets = self.base[0].clone();
        for &z in a {
            sets[z as usize].insert(0);
        }
        let st = self.state;
        location_log_prior(&st.core, &st.priors, &st.smoothness, 0, &sets)
    }

    /// Prior of location `k` with this stimulus at `a` (location `k - 1`) and `b` (location `k`).
    fn pair(&self, k: usize, a: &[u8], b: &[u8]) -> f64 {
        let mut sets = self.base[k].clone();
        for (&za, &zb) in a.iter().zip(b) {
            sets[zb as usize].insert(za as usize);
        }
        let st = self.state;
        location_log_prior(&st.core, &st.priors, &st.smoothness, k, &sets)
    }
}

/// Resamples all state sequences of stimulus `s` in place.
pub fn sample_latent_states<R: Rng + ?Sized>(
    s: usize,
    state: &mut ModelState,
    em: &StimulusEmissions,
    opts: LatentSamplerOptions,
    rng: &mut R,
) {
    let dims = state.dims;
    let (d0, kn, zz) = (dims.n_categories, dims.n_basis, dims.z_max);
    let gamma = opts.gamma;
    let current: Vec<Vec<u8>> = (0..kn)
        .map(|k| (0..d0).map(|d| state.latent.get(k, dims.combo(s, d)) as u8).collect())
        .collect();

    let pivots: Vec<Vec<u8>> = (0..kn)
        .map(|k| {
            let ball = hamming_ball(&current[k], opts.radius, zz);
            let m = ball.len() / d0;
            let idx = if k + 1 < kn && gamma != 0.0 {
                let w: Vec<f64> = ball
                    .chunks(d0)
                    .map(|u| balance(gamma, em.block(k, u, &current[k + 1])))
                    .collect();
                sample_log_categorical(&w, rng)
            } else {
                rng.random_range(0..m)
            };
            ball[idx * d0..(idx + 1) * d0].to_vec()
        })
        .collect();
    let supports: Vec<Vec<u8>> = pivots.iter().map(|v| hamming_ball(v, opts.radius, zz)).collect();

    let prior = ColumnPrior::new(state, s);
    let ctype: Vec<usize> = (0..d0).map(|d| if d == s { CORRECT } else { INCORRECT }).collect();
    let tm = &state.transitions;

    let potentials: Vec<Vec<f64>> = (0..kn - 1)
        .map(|k| {
            let sa = &supports[k];
            let sb = &supports[k + 1];
            let mb = sb.len() / d0;
            let pivot_w: Vec<f64> = sb.chunks(d0).map(|b| balance(gamma, em.block(k, &pivots[k], b))).collect();
            let mut phi = Vec::with_capacity(sa.len() / d0 * mb);
            let mut scratch = Vec::new();
            for a in sa.chunks(d0) {
                let ball_a = if gamma != 0.0 { hamming_ball(a, opts.radius, zz) } else { Vec::new() };
                for (bi, b) in sb.chunks(d0).enumerate() {
                    let l = em.block(k, a, b);
                    if l == f64::NEG_INFINITY || pivot_w[bi] == f64::NEG_INFINITY {
                        phi.push(f64::NEG_INFINITY);
                        continue;
                    }
                    let log_norm = if gamma == 0.0 {
                        0.0
                    } else {
                        scratch.clear();
                        scratch.extend(ball_a.chunks(d0).map(|u| balance(gamma, em.block(k, u, b))));
                        log_sum_exp(&scratch)
                    };
                    let mut trans = 0.0;
                    for d in 0..d0 {
                        trans += tm.log_prob(ctype[d], a[d] as usize, b[d] as usize);
                    }
                    phi.push(l + pivot_w[bi] - log_norm + trans + prior.pair(k + 1, a, b));
                }
            }
            phi
        })
        .collect();

    let mut messages: Vec<Vec<f64>> = vec![Vec::new(); kn];
    messages[kn - 1] = vec![0.0; supports[kn - 1].len() / d0];
    let mut buf = Vec::new();
    for k in (0..kn - 1).rev() {
        let ma = supports[k].len() / d0;
        let mb = supports[k + 1].len() / d0;
        let next = &messages[k + 1];
        let msg: Vec<f64> = (0..ma)
            .map(|ai| {
                buf.clear();
                buf.extend((0..mb).map(|bi| potentials[k][ai * mb + bi] + next[bi]));
                log_sum_exp(&buf)
            })
            .collect();
        messages[k] = msg;
    }

    let init: Vec<f64> = supports[0]
        .chunks(d0)
        .zip(&messages[0])
        .map(|(a, m)| prior.initial(a) + m)
        .collect();
    let mut idx = sample_log_categorical(&init, rng);
    let mut chosen = vec![idx];
    for k in 0..kn - 1 {
        let mb = supports[k + 1].len() / d0;
        let w: Vec<f64> = (0..mb)
            .map(|bi| potentials[k][idx * mb + bi] + messages[k + 1][bi])
            .collect();
        idx = sample_log_categorical(&w, rng);
        chosen.push(idx);
    }
    drop(prior);
    for (k, &ci) in chosen.iter().enumerate() {
        let v = &supports[k][ci * d0..(ci + 1) * d0];
        for d in 0..d0 {
            state.latent.set(k, dims.combo(s, d), v[d] as usize);
        }
    }
}
