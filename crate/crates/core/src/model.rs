//! Model dimensions and the full sampler state.
//!
//! Index conventions (all 0-based):
//! - combination `x = s * d0 + d` for stimulus `s` and decision `d`;
//! - basis location `k` in `0..n_basis`, block `t` in `0..n_blocks` with `n_basis = n_blocks + 1`;
//! - parameter `p`: [`DRIFT`] or [`BOUNDARY`];
//! - transition type: [`CORRECT`] when `d == s`, otherwise [`INCORRECT`];
//! - random-effect family `f = 2 * p + type`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bspline::SplineBasis;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::ig::{self, ParamSurface};

pub const DRIFT: usize = 0;
pub const BOUNDARY: usize = 1;
pub const CORRECT: usize = 0;
pub const INCORRECT: usize = 1;
pub const N_FAMILIES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_subjects: usize,
    pub n_blocks: usize,
    pub n_basis: usize,
    pub n_categories: usize,
    pub z_max: usize,
}

impl Dims {
    pub fn new(n_subjects: usize, n_blocks: usize, n_categories: usize, z_max: usize) -> Result<Self> {
        if n_blocks < 2 || n_categories < 2 || z_max == 0 || z_max > 255 || n_subjects == 0 {
            return Err(Error::InvalidArgument(format!(
                "invalid dimensions n={n_subjects}, T={n_blocks}, d0={n_categories}, z_max={z_max}"
            )));
        }
        Ok(Self {
            n_subjects,
            n_blocks,
            n_basis: n_blocks + 1,
            n_categories,
            z_max,
        })
    }

    pub fn from_dataset(ds: &Dataset, z_max: usize) -> Result<Self> {
        Self::new(ds.n_subjects(), ds.n_blocks(), ds.n_categories(), z_max)
    }

    pub fn n_combos(&self) -> usize {
        self.n_categories * self.n_categories
    }

    #[inline]
    pub fn combo(&self, stimulus: usize, decision: usize) -> usize {
        stimulus * self.n_categories + decision
    }

    /// `(stimulus, decision)` of combination `x`.
    #[inline]
    pub fn split_combo(&self, x: usize) -> (usize, usize) {
        (x / self.n_categories, x % self.n_categories)
    }

    #[inline]
    pub fn transition_type(&self, x: usize) -> usize {
        let (s, d) = self.split_combo(x);
        if s == d {
            CORRECT
        } else {
            INCORRECT
        }
    }

    pub fn basis(&self) -> SplineBasis {
        SplineBasis::for_blocks(self.n_blocks).expect("validated block count")
    }
}

/// Core coefficient tables `β*[p][k * z_max + z]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreCoefficients {
    pub z_max: usize,
    pub n_basis: usize,
    pub values: [Vec<f64>; 2],
}

impl CoreCoefficients {
    pub fn filled(n_basis: usize, z_max: usize, drift: f64, boundary: f64) -> Self {
        Self {
            z_max,
            n_basis,
            values: [vec![drift; n_basis * z_max], vec![boundary; n_basis * z_max]],
        }
    }

    #[inline]
    pub fn get(&self, p: usize, k: usize, z: usize) -> f64 {
        self.values[p][k * self.z_max + z]
    }

    #[inline]
    pub fn set(&mut self, p: usize, k: usize, z: usize, v: f64) {
        self.values[p][k * self.z_max + z] = v;
    }
}

/// Latent labels `z[k * n_combos + x]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentStateMatrix {
    pub n_basis: usize,
    pub n_combos: usize,
    pub labels: Vec<u8>,
}

impl LatentStateMatrix {
    pub fn filled(n_basis: usize, n_combos: usize, label: u8) -> Self {
        Self {
            n_basis,
            n_combos,
            labels: vec![label; n_basis * n_combos],
        }
    }

    #[inline]
    pub fn get(&self, k: usize, x: usize) -> usize {
        self.labels[k * self.n_combos + x] as usize
    }

    #[inline]
    pub fn set(&mut self, k: usize, x: usize, z: usize) {
        self.labels[k * self.n_combos + x] = z as u8;
    }

    /// Whether any combination sits in state `z` at location `k`.
    pub fn is_assigned(&self, k: usize, z: usize) -> bool {
        self.labels[k * self.n_combos..(k + 1) * self.n_combos]
            .iter()
            .any(|&l| l as usize == z)
    }
}

/// Log transition matrices `log π[c][z * z_max + z']` and their Dirichlet concentrations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    pub z_max: usize,
    pub log_pi: [Vec<f64>; 2],
    pub alpha: [f64; 2],
}

impl TransitionModel {
    pub fn uniform(z_max: usize) -> Self {
        let v = -(z_max as f64).ln();
        Self {
            z_max,
            log_pi: [vec![v; z_max * z_max], vec![v; z_max * z_max]],
            alpha: [1.0, 1.0],
        }
    }

    #[inline]
    pub fn log_prob(&self, c: usize, from: usize, to: usize) -> f64 {
        self.log_pi[c][from * self.z_max + to]
    }

    pub fn row(&self, c: usize, from: usize) -> &[f64] {
        &self.log_pi[c][from * self.z_max..(from + 1) * self.z_max]
    }

    /// Transition probabilities (not logs) of type `c`.
    pub fn probabilities(&self, c: usize) -> Vec<f64> {
        self.log_pi[c].iter().map(|v| v.exp()).collect()
    }
}

/// Subject random-effect spline coefficients `[(i * 4 + f) * n_basis + k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomEffectCoeffs {
    pub n_subjects: usize,
    pub n_basis: usize,
    pub values: Vec<f64>,
}

impl RandomEffectCoeffs {
    pub fn zeros(n_subjects: usize, n_basis: usize) -> Self {
        Self {
            n_subjects,
            n_basis,
            values: vec![0.0; n_subjects * N_FAMILIES * n_basis],
        }
    }

    #[inline]
    pub fn coeffs(&self, i: usize, f: usize) -> &[f64] {
        let o = (i * N_FAMILIES + f) * self.n_basis;
        &self.values[o..o + self.n_basis]
    }

    #[inline]
    pub fn coeffs_mut(&mut self, i: usize, f: usize) -> &mut [f64] {
        let o = (i * N_FAMILIES + f) * self.n_basis;
        &mut self.values[o..o + self.n_basis]
    }

    pub fn subject(&self, i: usize) -> &[f64] {
        let w = N_FAMILIES * self.n_basis;
        &self.values[i * w..(i + 1) * w]
    }
}

#[inline]
pub fn family(p: usize, c: usize) -> usize {
    2 * p + c
}

/// Random-effect variance pairs, shared between the correct and incorrect
/// families of each parameter: `[drift a, drift s, boundary a, boundary s]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub values: [f64; 4],
}

impl VarianceComponents {
    pub fn ones() -> Self {
        Self { values: [1.0; 4] }
    }

    #[inline]
    pub fn amplitude(&self, p: usize) -> f64 {
        self.values[2 * p]
    }

    #[inline]
    pub fn smoothness(&self, p: usize) -> f64 {
        self.values[2 * p + 1]
    }
}

/// Fixed prior constants for the core coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConstants {
    /// Prior centre `μ_{β,0}` on the log scale for drift and boundary.
    pub mu0: [f64; 2],
    /// Variance for slots no combination occupies.
    pub unassigned_var: f64,
    /// Variance for occupied slots at the first location.
    pub initial_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub dims: Dims,
    pub weights: Vec<[f64; 2]>,
    pub core: CoreCoefficients,
    pub latent: LatentStateMatrix,
    pub transitions: TransitionModel,
    pub random_effects: RandomEffectCoeffs,
    pub re_variances: VarianceComponents,
    /// `σ²_{β,1}` for drift and boundary.
    pub smoothness: [f64; 2],
    /// Offsets `[i * d0 + s]` in seconds.
    pub offsets: Vec<f64>,
    pub priors: PriorConstants,
    pub iteration: usize,
}

impl ModelState {
    /// Fixed-effect part of `log θ` for combination `x` at block `t`.
    #[inline]
    pub fn fixed_log_param(&self, p: usize, t: usize, x: usize) -> f64 {
        let [w0, w1] = self.weights[t];
        let z0 = self.latent.get(t, x);
        let z1 = self.latent.get(t + 1, x);
        w0 * self.core.get(p, t, z0) + w1 * self.core.get(p, t + 1, z1)
    }

    /// Random-effect part `u^{(i)}(t)` for family `f`.
    #[inline]
    pub fn re_log_param(&self, i: usize, f: usize, t: usize) -> f64 {
        let [w0, w1] = self.weights[t];
        let c = self.random_effects.coeffs(i, f);
        w0 * c[t] + w1 * c[t + 1]
    }

    #[inline]
    pub fn log_param(&self, p: usize, i: usize, t: usize, s: usize, d: usize) -> f64 {
        let x = self.dims.combo(s, d);
        let c = if s == d { CORRECT } else { INCORRECT };
        self.fixed_log_param(p, t, x) + self.re_log_param(i, family(p, c), t)
    }

    #[inline]
    pub fn offset(&self, i: usize, s: usize) -> f64 {
        self.offsets[i * self.dims.n_categories + s]
    }

    /// Log-likelihood of one trial.
    pub fn trial_log_lik(&self, ds: &Dataset, idx: usize) -> f64 {
        ig::dataset_log_lik(ds, self, Some(&[idx]))
    }

    /// Total log-likelihood, reduced in trial order.
    pub fn log_likelihood(&self, ds: &Dataset) -> f64 {
        let parts: Vec<f64> = (0..ds.len())
            .into_par_iter()
            .with_min_len(256)
            .map(|i| self.trial_log_lik(ds, i))
            .collect();
        parts.iter().sum()
    }

    /// Expressed coefficient vector of combination `x` for parameter `p`.
    pub fn expressed(&self, p: usize, x: usize) -> Vec<f64> {
        (0..self.dims.n_basis)
            .map(|k| self.core.get(p, k, self.latent.get(k, x)))
            .collect()
    }

    /// Checks the positivity, range and normalisation invariants of the state.
    pub fn check_invariants(&self, ds: &Dataset) -> Result<()> {
        let d = &self.dims;
        let fail = |m: String| Err(Error::Numerical(m));
        if self.latent.labels.iter().any(|&l| l as usize >= d.z_max) {
            return fail("latent label out of range".into());
        }
        for c in 0..2 {
            for z in 0..d.z_max {
                let s: f64 = self.transitions.row(c, z).iter().map(|v| v.exp()).sum();
                if (s - 1.0).abs() > 1e-12 {
                    return fail(format!("transition row {z} of type {c} sums to {s}"));
                }
            }
            if !(self.transitions.alpha[c] > 0.0) {
                return fail("nonpositive concentration".into());
            }
            if !(self.smoothness[c] > 0.0) {
                return fail("nonpositive smoothness variance".into());
            }
        }
        if self.re_variances.values.iter().any(|v| !(*v > 0.0)) {
            return fail("nonpositive random-effect variance".into());
        }
        for i in 0..d.n_subjects {
            for s in 0..d.n_categories {
                let o = self.offset(i, s);
                let bound = ds.min_rt(i, s)?;
                if !(o > 0.0 && o < bound) {
                    return fail(format!("offset {o} of subject {} stimulus {} outside (0, {bound})", i + 1, s + 1));
                }
            }
        }
        if self.core.values.iter().flatten().any(|v| !v.is_finite())
            || self.random_effects.values.iter().any(|v| !v.is_finite())
        {
            return fail("non-finite coefficient".into());
        }
        Ok(())
    }
}

impl ParamSurface for ModelState {
    #[inline]
    fn offset(&self, subject: usize, stimulus: usize) -> f64 {
        ModelState::offset(self, subject, stimulus)
    }

    #[inline]
    fn accumulator(&self, subject: usize, block: usize, stimulus: usize, decision: usize) -> (f64, f64) {
        (
            self.log_param(DRIFT, subject, block, stimulus, decision).exp(),
            self.log_param(BOUNDARY, subject, block, stimulus, decision).exp(),
        )
    }
}

/// Log of the accumulator-`d` factor of one trial: density if it won, survival otherwise.
#[inline]
pub fn accumulator_term(u: f64, log_mu: f64, log_b: f64, winner: bool) -> f64 {
    if winner {
        ig::log_pdf_decision(u, log_mu.exp(), log_b.exp())
    } else {
        ig::log_survival_decision(u, log_mu.exp(), log_b.exp())
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// A small hand-built state with distinct coefficients everywhere.
    pub fn toy_state(n: usize, t: usize, d0: usize, z_max: usize) -> ModelState {
        let dims = Dims::new(n, t, d0, z_max).unwrap();
        let k = dims.n_basis;
        let mut core = CoreCoefficients::filled(k, z_max, 0.0, 0.0);
        for kk in 0..k {
            for z in 0..z_max {
                core.set(DRIFT, kk, z, 0.3 + 0.05 * kk as f64 - 0.1 * z as f64);
                core.set(BOUNDARY, kk, z, 0.2 - 0.02 * kk as f64 + 0.07 * z as f64);
            }
        }
        let mut latent = LatentStateMatrix::filled(k, dims.n_combos(), 0);
        for kk in 0..k {
            for x in 0..dims.n_combos() {
                latent.set(kk, x, (x + kk) % z_max);
            }
        }
        let mut re = RandomEffectCoeffs::zeros(n, k);
        for (j, v) in re.values.iter_mut().enumerate() {
            *v = 0.01 * ((j % 7) as f64 - 3.0);
        }
        ModelState {
            dims,
            weights: dims.basis().block_weights(),
            core,
            latent,
            transitions: TransitionModel::uniform(z_max),
            random_effects: re,
            re_variances: VarianceComponents::ones(),
            smoothness: [1.0, 1.0],
            offsets: vec![0.1; n * d0],
            priors: PriorConstants {
                mu0: [0.0, 0.0],
                unassigned_var: 4.0,
                initial_var: 1e6,
            },
            iteration: 0,
        }
    }
}
