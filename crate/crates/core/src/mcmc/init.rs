//! Starting values for the sampler.

use crate::config::ModelConfig;
use crate::data::Dataset;
use crate::error::Result;
use crate::model::{
    CoreCoefficients, Dims, LatentStateMatrix, ModelState, PriorConstants, RandomEffectCoeffs, TransitionModel,
    VarianceComponents, BOUNDARY, DRIFT,
};

/// Method-of-moments `(μ, b)` for an inverse-Gaussian decision time with
/// mean `m` and variance `v`: `μ = sqrt(m / v)`, `b = m μ`.
pub fn moment_estimates(times: &[f64]) -> Option<(f64, f64)> {
    if times.len() < 2 {
        return None;
    }
    let n = times.len() as f64;
    let m = times.iter().sum::<f64>() / n;
    let v = times.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (n - 1.0);
    if !(m > 0.0 && v > 0.0) {
        return None;
    }
    let mu = (m / v).sqrt();
    Some((mu, m * mu))
}

/// Initial state: offsets at half the minimum response time, moment-based
/// core coefficients and the "one state per tone, errors share a state"
/// latent configuration.
pub fn init_state(ds: &Dataset, cfg: &ModelConfig) -> Result<ModelState> {
    let dims = Dims::from_dataset(ds, cfg.z_max)?;
    let (n, d0, kn, zz) = (dims.n_subjects, dims.n_categories, dims.n_basis, dims.z_max);

    let mut offsets = vec![0.0; n * d0];
    for i in 0..n {
        for s in 0..d0 {
            offsets[i * d0 + s] = 0.5 * ds.min_rt(i, s)?;
        }
    }
    let adjusted = |idx: usize| {
        let r = &ds.records()[idx];
        r.rt - offsets[r.subject * d0 + r.stimulus]
    };

    let all: Vec<f64> = (0..ds.len()).map(adjusted).collect();
    let pooled = moment_estimates(&all).unwrap_or((1.0, 1.0));
    let mu0 = [pooled.0.ln(), pooled.1.ln()];

    let mut cell = vec![[0.0; 2]; dims.n_combos()];
    for s in 0..d0 {
        for d in 0..d0 {
            let times: Vec<f64> = ds
                .records()
                .iter()
                .enumerate()
                .filter(|(_, r)| r.stimulus == s && r.response == d)
                .map(|(idx, _)| adjusted(idx))
                .collect();
            let (mu, b) = moment_estimates(&times).unwrap_or_else(|| {
                if !ds.is_empty() {
                    log::debug!("stimulus {} decision {}: too few trials, using pooled moments", s + 1, d + 1);
                }
                pooled
            });
            cell[dims.combo(s, d)] = [mu.ln(), b.ln()];
        }
    }

    let mut latent = LatentStateMatrix::filled(kn, dims.n_combos(), 0);
    for x in 0..dims.n_combos() {
        let (s, d) = dims.split_combo(x);
        let z = if s == d { s.min(zz - 1) } else { d0.min(zz - 1) };
        for k in 0..kn {
            latent.set(k, x, z);
        }
    }

    let mut core = CoreCoefficients::filled(kn, zz, mu0[DRIFT], mu0[BOUNDARY]);
    for z in 0..zz {
        let members: Vec<usize> = (0..dims.n_combos()).filter(|&x| latent.get(0, x) == z).collect();
        if members.is_empty() {
            continue;
        }
        for p in [DRIFT, BOUNDARY] {
            let v = members.iter().map(|&x| cell[x][p]).sum::<f64>() / members.len() as f64;
            for k in 0..kn {
                core.set(p, k, z, v);
            }
        }
    }

    Ok(ModelState {
        dims,
        weights: dims.basis().block_weights(),
        core,
        latent,
        transitions: TransitionModel::uniform(zz),
        random_effects: RandomEffectCoeffs::zeros(n, kn),
        re_variances: VarianceComponents::ones(),
        smoothness: [1.0, 1.0],
        offsets,
        priors: PriorConstants {
            mu0,
            unassigned_var: cfg.unassigned_prior_var,
            initial_var: cfg.initial_prior_var,
        },
        iteration: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TrialRecord;
    use crate::ig::{simulate_trial, RaceParams};
    use crate::random::task_rng;

    #[test]
    fn moments_invert_ig_mean_and_variance() {
        // IG decision time with μ = 2, b = 3: mean b/μ = 1.5, variance b/μ³ = 0.375
        let (mu, b) = (2.0f64, 3.0f64);
        let mean = b / mu;
        let var = b / mu.powi(3);
        let m_hat = (mean / var).sqrt();
        assert!((m_hat - mu).abs() < 1e-12);
        assert!((mean * m_hat - b).abs() < 1e-12);
        assert!(moment_estimates(&[1.0]).is_none());
        assert!(moment_estimates(&[1.0, 1.0]).is_none());
    }

    #[test]
    fn init_labels_and_offsets() {
        let mut rng = task_rng(5, 0);
        let rp = RaceParams::new(0.2, vec![2.0, 1.0, 1.0], vec![2.0, 2.5, 2.5]).unwrap();
        let mut recs = Vec::new();
        for t in 0..3 {
            for l in 0..60 {
                let s = l % 3;
                let mut p = rp.clone();
                p.mu.rotate_right(s);
                let (d, rt) = simulate_trial(&p, &mut rng);
                recs.push(TrialRecord { subject: 0, block: t, trial: l, stimulus: s, response: d, rt });
            }
        }
        let ds = Dataset::new(recs, Default::default()).unwrap();
        let cfg = ModelConfig { z_max: 6, ..Default::default() };
        let st = init_state(&ds, &cfg).unwrap();
        st.check_invariants(&ds).unwrap();
        for s in 0..3 {
            assert_eq!(st.latent.get(0, st.dims.combo(s, s)), s);
            assert_eq!(st.latent.get(3, st.dims.combo(s, (s + 1) % 3)), 3);
            assert!((st.offset(0, s) - 0.5 * ds.min_rt(0, s).unwrap()).abs() < 1e-15);
        }
        // z_max smaller than d0 + 1 clamps every label into range
        let st = init_state(&ds, &ModelConfig { z_max: 2, ..Default::default() }).unwrap();
        assert!(st.latent.labels.iter().all(|&l| l < 2));
    }
}
