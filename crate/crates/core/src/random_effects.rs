//! Subject-level functional random effects with first-difference penalised
//! spline priors and half-Cauchy variance components.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::adaptive::AdaptiveScale;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{accumulator_term, family, ModelState, BOUNDARY, CORRECT, DRIFT, INCORRECT, N_FAMILIES};
use crate::normal::half_cauchy_log_density;
use crate::random::task_rng;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// `P = DᵀD` for the `(K-1) × K` first-difference operator `D`, row-major.
pub fn difference_penalty(k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("difference penalty needs K >= 2, got {k}")));
    }
    let mut p = vec![0.0; k * k];
    for j in 0..k - 1 {
        p[j * k + j] += 1.0;
        p[(j + 1) * k + j + 1] += 1.0;
        p[j * k + j + 1] -= 1.0;
        p[(j + 1) * k + j] -= 1.0;
    }
    Ok(p)
}

/// Lower Cholesky factor of a symmetric positive definite row-major matrix.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for m in 0..j {
                s -= l[i * n + m] * l[j * n + m];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// `log det(σ_a⁻² I + σ_s⁻² P)` for the `K × K` difference penalty `P`.
pub fn precision_log_det(var_a: f64, var_s: f64, k: usize) -> f64 {
    let mut q = difference_penalty(k).expect("K >= 2");
    for v in q.iter_mut() {
        *v /= var_s;
    }
    for j in 0..k {
        q[j * k + j] += 1.0 / var_a;
    }
    let l = cholesky(&q, k).expect("precision is positive definite");
    2.0 * (0..k).map(|j| l[j * k + j].ln()).sum::<f64>()
}

/// `βᵀ(σ_a⁻² I + σ_s⁻² P)β`.
pub fn precision_quad_form(beta: &[f64], var_a: f64, var_s: f64) -> f64 {
    let sq: f64 = beta.iter().map(|b| b * b).sum();
    let diff: f64 = beta.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    sq / var_a + diff / var_s
}

/// Multivariate normal log density with precision `σ_a⁻² I + σ_s⁻² P`.
pub fn re_log_prior(beta: &[f64], var_a: f64, var_s: f64) -> f64 {
    let k = beta.len();
    0.5 * precision_log_det(var_a, var_s, k) - 0.5 * k as f64 * LN_2PI - 0.5 * precision_quad_form(beta, var_a, var_s)
}

/// Draw from the random-effect prior `N(0, (σ_a⁻² I + σ_s⁻² P)⁻¹)`.
pub fn sample_re_prior<R: Rng + ?Sized>(var_a: f64, var_s: f64, k: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(var_a > 0.0 && var_s > 0.0) {
        return Err(Error::InvalidArgument("variance components must be positive".into()));
    }
    let mut q = difference_penalty(k)?;
    for v in q.iter_mut() {
        *v /= var_s;
    }
    for j in 0..k {
        q[j * k + j] += 1.0 / var_a;
    }
    let l = cholesky(&q, k).ok_or_else(|| Error::Numerical("precision not positive definite".into()))?;
    let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    // Lᵀ u = z by back substitution
    let mut u = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| l[j * k + i] * u[j]).sum();
        u[i] = (z[i] - s) / l[i * k + i];
    }
    Ok(u)
}

/// Log-likelihood of the accumulator terms of subject `i` that depend on
/// family `f`, with the subject's random effects replaced by `coeffs`
/// (all four families, `4 * K` values).
fn subject_family_log_lik(state: &ModelState, ds: &Dataset, i: usize, f: usize, coeffs: &[f64]) -> f64 {
    let dims = state.dims;
    let kn = dims.n_basis;
    let c = f % 2;
    let re = |fam: usize, t: usize| {
        let [w0, w1] = state.weights[t];
        w0 * coeffs[fam * kn + t] + w1 * coeffs[fam * kn + t + 1]
    };
    let mut total = 0.0;
    for &idx in ds.trials_of_subject(i) {
        let r = &ds.records()[idx];
        let s = r.stimulus;
        let u = r.rt - state.offset(i, s);
        for d in 0..dims.n_categories {
            let dc = if d == s { CORRECT } else { INCORRECT };
            if dc != c {
                continue;
            }
            let x = dims.combo(s, d);
            let m = state.fixed_log_param(DRIFT, r.block, x) + re(family(DRIFT, c), r.block);
            let b = state.fixed_log_param(BOUNDARY, r.block, x) + re(family(BOUNDARY, c), r.block);
            total += accumulator_term(u, m, b, r.response == d);
        }
    }
    total
}

/// Per-subject adaptive state of the random-effect updates.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReScales {
    pub scales: Vec<AdaptiveScale>,
    pub componentwise: Vec<bool>,
}

impl ReScales {
    pub fn new(n_subjects: usize, scale: f64) -> Self {
        Self {
            scales: vec![AdaptiveScale::new(scale); n_subjects * N_FAMILIES],
            componentwise: vec![false; n_subjects * N_FAMILIES],
        }
    }

    /// Closes the batch for every family; during adaptation a block sampler
    /// whose batch acceptance fell below 5% switches to componentwise moves.
    pub fn end_batch(&mut self, target: f64, adapt: bool) {
        for (s, cw) in self.scales.iter_mut().zip(self.componentwise.iter_mut()) {
            if let Some(rate) = s.end_batch(target, adapt) {
                if adapt && !*cw && rate < 0.05 {
                    *cw = true;
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update_subject<R: Rng + ?Sized>(
    state: &ModelState,
    ds: &Dataset,
    i: usize,
    coeffs: &mut [f64],
    scales: &mut [AdaptiveScale],
    componentwise: &[bool],
    prior_only: bool,
    rng: &mut R,
) {
    let kn = state.dims.n_basis;
    for f in 0..N_FAMILIES {
        let p = f / 2;
        let (va, vs) = (state.re_variances.amplitude(p), state.re_variances.smoothness(p));
        let sd = scales[f].scale();
        let coords: Vec<Option<usize>> = if componentwise[f] {
            (0..kn).map(Some).collect()
        } else {
            vec![None]
        };
        for coord in coords {
            let cur: Vec<f64> = coeffs[f * kn..(f + 1) * kn].to_vec();
            let mut prop = cur.clone();
            match coord {
                None => {
                    for v in prop.iter_mut() {
                        let e: f64 = rng.sample(StandardNormal);
                        *v += sd * e;
                    }
                }
                Some(j) => {
                    let e: f64 = rng.sample(StandardNormal);
                    prop[j] += sd * e;
                }
            }
            let lc = if prior_only { 0.0 } else { subject_family_log_lik(state, ds, i, f, coeffs) };
            coeffs[f * kn..(f + 1) * kn].copy_from_slice(&prop);
            let lp = if prior_only { 0.0 } else { subject_family_log_lik(state, ds, i, f, coeffs) };
            let log_ratio = lp - lc - 0.5 * (precision_quad_form(&prop, va, vs) - precision_quad_form(&cur, va, vs));
            let accepted = rng.random::<f64>().ln() < log_ratio;
            if !accepted {
                coeffs[f * kn..(f + 1) * kn].copy_from_slice(&cur);
            }
            scales[f].record(accepted);
        }
    }
}

/// Random-walk Metropolis update of every subject's four coefficient vectors.
/// Subjects run in parallel, each on its own stream derived from `seed`.
pub fn update_re_coeffs(state: &mut ModelState, ds: &Dataset, scales: &mut ReScales, prior_only: bool, seed: u64) {
    let mut values = std::mem::take(&mut state.random_effects.values);
    let width = N_FAMILIES * state.dims.n_basis;
    {
        let st: &ModelState = state;
        values
            .par_chunks_mut(width)
            .zip(scales.scales.par_chunks_mut(N_FAMILIES))
            .zip(scales.componentwise.par_chunks(N_FAMILIES))
            .enumerate()
            .for_each(|(i, ((coeffs, sc), cw))| {
                let mut rng = task_rng(seed, i as u64);
                update_subject(st, ds, i, coeffs, sc, cw, prior_only, &mut rng);
            });
    }
    state.random_effects.values = values;
}

/// Log of the variance-component full conditional for parameter `p`, up to a constant.
pub fn re_variance_log_target(state: &ModelState, p: usize, var_a: f64, var_s: f64) -> f64 {
    if !(var_a > 0.0 && var_s > 0.0) {
        return f64::NEG_INFINITY;
    }
    let kn = state.dims.n_basis;
    let n_vec = (state.dims.n_subjects * 2) as f64;
    let mut quad = 0.0;
    for i in 0..state.dims.n_subjects {
        for c in [CORRECT, INCORRECT] {
            quad += precision_quad_form(state.random_effects.coeffs(i, family(p, c)), var_a, var_s);
        }
    }
    half_cauchy_log_density(var_a, 1.0) + half_cauchy_log_density(var_s, 1.0)
        + 0.5 * n_vec * precision_log_det(var_a, var_s, kn)
        - 0.5 * quad
}

/// Log-normal random-walk updates of `σ²_{u,a}` and `σ²_{u,s}` for drift and boundary.
pub fn update_re_variances<R: Rng + ?Sized>(state: &mut ModelState, scales: &mut [AdaptiveScale; 4], rng: &mut R) {
    for p in [DRIFT, BOUNDARY] {
        for which in 0..2 {
            let j = 2 * p + which;
            let cur = state.re_variances.values[j];
            let e: f64 = rng.sample(StandardNormal);
            let prop = cur * (scales[j].scale() * e).exp();
            let mut pv = state.re_variances;
            pv.values[j] = prop;
            let log_ratio = re_variance_log_target(state, p, pv.amplitude(p), pv.smoothness(p)) + prop.ln()
                - re_variance_log_target(state, p, state.re_variances.amplitude(p), state.re_variances.smoothness(p))
                - cur.ln();
            let accepted = rng.random::<f64>().ln() < log_ratio;
            if accepted {
                state.re_variances = pv;
            }
            scales[j].record(accepted);
        }
    }
}
