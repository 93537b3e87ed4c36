//! Geweke convergence diagnostics.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{family, CORRECT, INCORRECT, N_FAMILIES};
use crate::normal::cdf;
use crate::posterior::PosteriorDraws;

/// Shortest series accepted by [`geweke_z`].
pub const MIN_SERIES_LEN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GewekeResult {
    pub z: f64,
    /// Two-sided normal p-value.
    pub p_value: f64,
    /// Both segments have zero spectral variance.
    pub degenerate: bool,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Spectral density at frequency zero with a Bartlett lag window of
/// bandwidth `⌊√n⌋`.
pub fn spectral_density_at_zero(x: &[f64]) -> f64 {
    let n = x.len();
    let m = mean(x);
    let dev: Vec<f64> = x.iter().map(|v| v - m).collect();
    let acov = |h: usize| dev[..n - h].iter().zip(&dev[h..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let bw = (n as f64).sqrt().floor() as usize;
    let mut s = acov(0);
    for h in 1..=bw.min(n - 1) {
        s += 2.0 * (1.0 - h as f64 / (bw + 1) as f64) * acov(h);
    }
    s.max(0.0)
}

/// Compares the mean of the first `frac_a` of `series` with the mean of the
/// last `frac_b`, standardised by the segment spectral variances.
pub fn geweke_z(series: &[f64], frac_a: f64, frac_b: f64) -> Result<GewekeResult> {
    let n = series.len();
    if n < MIN_SERIES_LEN {
        return Err(Error::InvalidArgument(format!(
            "Geweke needs at least {MIN_SERIES_LEN} values, got {n}"
        )));
    }
    if !(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "window fractions must be positive with sum at most 1, got {frac_a} and {frac_b}"
        )));
    }
    let na = ((frac_a * n as f64).floor() as usize).max(2);
    let nb = ((frac_b * n as f64).floor() as usize).max(2);
    let a = &series[..na];
    let b = &series[n - nb..];
    let diff = mean(a) - mean(b);
    let var = spectral_density_at_zero(a) / na as f64 + spectral_density_at_zero(b) / nb as f64;
    let scale = series.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if var <= (f64::EPSILON * scale).powi(2) {
        let (z, p_value) = if diff.abs() <= f64::EPSILON * scale {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        };
        return Ok(GewekeResult { z, p_value, degenerate: true });
    }
    let z = diff / var.sqrt();
    Ok(GewekeResult {
        z,
        p_value: 2.0 * cdf(-z.abs()),
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeEntry {
    pub parameter: String,
    /// Block (1-based) for block-wise trajectory values.
    pub block: Option<usize>,
    pub result: GewekeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeReport {
    pub frac_a: f64,
    pub frac_b: f64,
    pub subject: usize,
    pub entries: Vec<GewekeEntry>,
    pub acceptance: BTreeMap<String, f64>,
}

/// Named traces tracked by [`diagnostics_report`]: block-wise drift and
/// boundary of every combination for `subject`, that subject's offsets, the
/// variance components, the concentrations and the log-likelihood.
pub fn tracked_traces(draws: &PosteriorDraws, subject: usize) -> Result<Vec<(String, Option<usize>, Vec<f64>)>> {
    let dims = draws.dims;
    if subject >= dims.n_subjects {
        return Err(Error::InvalidArgument(format!("subject {} out of range", subject + 1)));
    }
    let (kn, d0) = (dims.n_basis, dims.n_categories);
    let weights = dims.basis().block_weights();
    let mut out = Vec::new();
    for (p, pname) in ["drift", "boundary"].iter().enumerate() {
        for x in 0..dims.n_combos() {
            let (s, d) = dims.split_combo(x);
            let f = family(p, if s == d { CORRECT } else { INCORRECT });
            for (t, [w0, w1]) in weights.iter().enumerate() {
                let trace = draws
                    .draws
                    .iter()
                    .map(|dr| {
                        let e = &dr.expressed[p][x * kn..(x + 1) * kn];
                        let o = (subject * N_FAMILIES + f) * kn;
                        let u = &dr.random_effects[o..o + kn];
                        (w0 * (e[t] + u[t]) + w1 * (e[t + 1] + u[t + 1])).exp()
                    })
                    .collect();
                out.push((format!("{pname}_s{}_d{}", s + 1, d + 1), Some(t + 1), trace));
            }
        }
    }
    for s in 0..d0 {
        let j = subject * d0 + s;
        out.push((format!("offset_s{}", s + 1), None, draws.draws.iter().map(|d| d.offsets[j]).collect()));
    }
    let scalar = |name: &str, f: &dyn Fn(&crate::posterior::Draw) -> f64| {
        (name.to_string(), None, draws.draws.iter().map(f).collect::<Vec<f64>>())
    };
    out.push(scalar("smoothness_drift", &|d| d.smoothness[0]));
    out.push(scalar("smoothness_boundary", &|d| d.smoothness[1]));
    out.push(scalar("re_amplitude_drift", &|d| d.re_variances[0]));
    out.push(scalar("re_smoothness_drift", &|d| d.re_variances[1]));
    out.push(scalar("re_amplitude_boundary", &|d| d.re_variances[2]));
    out.push(scalar("re_smoothness_boundary", &|d| d.re_variances[3]));
    out.push(scalar("concentration_correct", &|d| d.concentration[0]));
    out.push(scalar("concentration_incorrect", &|d| d.concentration[1]));
    out.push(scalar("log_lik", &|d| d.log_lik));
    Ok(out)
}

/// Geweke statistics of every tracked trace.
pub fn diagnostics_report(
    draws: &PosteriorDraws,
    subject: usize,
    frac_a: f64,
    frac_b: f64,
    acceptance: BTreeMap<String, f64>,
) -> Result<GewekeReport> {
    let traces = tracked_traces(draws, subject)?;
    let entries = traces
        .into_par_iter()
        .map(|(parameter, block, trace)| {
            Ok(GewekeEntry {
                parameter,
                block,
                result: geweke_z(&trace, frac_a, frac_b)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GewekeReport {
        frac_a,
        frac_b,
        subject,
        entries,
        acceptance,
    })
}

impl GewekeReport {
    /// Writes `geweke.csv` and `acceptance.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut body = String::from("parameter,block,z,p_value,degenerate\n");
        for e in &self.entries {
            let block = e.block.map(|b| b.to_string()).unwrap_or_default();
            body += &format!(
                "{},{},{},{},{}\n",
                e.parameter, block, e.result.z, e.result.p_value, e.result.degenerate
            );
        }
        let path = dir.join("geweke.csv");
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        let mut body = String::from("update,acceptance_rate\n");
        for (k, v) in &self.acceptance {
            body += &format!("{k},{v}\n");
        }
        let path = dir.join("acceptance.csv");
        fs::write(&path, body).map_err(|e| Error::io(&path, e))
    }

    /// Fraction of non-degenerate entries with `p < alpha`.
    pub fn rejection_rate(&self, alpha: f64) -> f64 {
        let live: Vec<_> = self.entries.iter().filter(|e| !e.result.degenerate).collect();
        if live.is_empty() {
            return 0.0;
        }
        live.iter().filter(|e| e.result.p_value < alpha).count() as f64 / live.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::fixtures::fixture;
    use crate::random::task_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn constant_series_is_degenerate() {
        let r = geweke_z(&[3.5; 200], 0.1, 0.5).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.z, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn short_series_and_bad_fractions_rejected() {
        assert!(geweke_z(&[1.0; 49], 0.1, 0.5).is_err());
        assert!(geweke_z(&[1.0; 100], 0.6, 0.5).is_err());
        assert!(geweke_z(&[1.0; 100], 0.0, 0.5).is_err());
    }

    #[test]
    fn level_shift_is_detected() {
        let mut rng = task_rng(1, 0);
        let x: Vec<f64> = (0..2000)
            .map(|i| rng.sample::<f64, _>(StandardNormal) + if i < 1000 { 0.0 } else { 5.0 })
            .collect();
        assert!(geweke_z(&x, 0.1, 0.5).unwrap().p_value < 0.01);
    }

    #[test]
    fn white_noise_spectral_density_is_variance() {
        let mut rng = task_rng(2, 0);
        let n = 100_000;
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        // Bartlett estimator: sd ≈ S(0) √(4L / 3n) with L = ⌊√n⌋
        let sd = (4.0 * (n as f64).sqrt().floor() / (3.0 * n as f64)).sqrt();
        assert!((spectral_density_at_zero(&x) - 1.0).abs() < 4.0 * sd);
    }

    #[test]
    fn ar1_spectral_density() {
        // AR(1) with ρ = 0.5 and unit innovations: S(0) = 1 / (1 - ρ)² = 4
        let mut rng = task_rng(3, 0);
        let mut v = 0.0;
        let n = 200_000;
        let x: Vec<f64> = (0..n)
            .map(|_| {
                v = 0.5 * v + rng.sample::<f64, _>(StandardNormal);
                v
            })
            .collect();
        let sd = 4.0 * (4.0 * (n as f64).sqrt().floor() / (3.0 * n as f64)).sqrt();
        assert!((spectral_density_at_zero(&x) - 4.0).abs() < 4.0 * sd);
    }

    #[test]
    fn constant_draws_report_all_degenerate() {
        let mut d = fixture(2, 3, 2, 60);
        for dr in d.draws.iter_mut() {
            dr.expressed = [vec![0.3; dr.expressed[0].len()], vec![0.1; dr.expressed[1].len()]];
            dr.offsets = vec![0.2; dr.offsets.len()];
        }
        let rep = diagnostics_report(&d, 1, 0.1, 0.5, BTreeMap::new()).unwrap();
        assert_eq!(rep.entries.len(), 2 * 4 * 3 + 2 + 9);
        assert!(rep.entries.iter().all(|e| e.result.degenerate));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn affine_invariance(a in 0.1f64..10.0, c in -50.0f64..50.0, seed in 0u64..1000) {
            let mut rng = task_rng(seed, 0);
            let x: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
            let y: Vec<f64> = x.iter().map(|v| a * v + c).collect();
            let neg: Vec<f64> = x.iter().map(|v| -a * v + c).collect();
            let zx = geweke_z(&x, 0.1, 0.5).unwrap().z;
            prop_assert!((geweke_z(&y, 0.1, 0.5).unwrap().z - zx).abs() < 1e-8 * (1.0 + zx.abs()));
            prop_assert!((geweke_z(&neg, 0.1, 0.5).unwrap().z + zx).abs() < 1e-8 * (1.0 + zx.abs()));
        }

        #[test]
        fn p_value_in_unit_interval(seed in 0u64..1000) {
            let mut rng = task_rng(seed, 1);
            let x: Vec<f64> = (0..100).map(|_| rng.sample::<f64, _>(StandardNormal).powi(3)).collect();
            let r = geweke_z(&x, 0.2, 0.3).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
    }
}
