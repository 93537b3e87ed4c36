//! Synthetic datasets from the full generative model, and scoring of a fit
//! against the truth that generated them.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DesignOverride, TrialRecord};
use crate::error::{Error, Result};
use crate::ig::{simulate_trial, RaceParams};
use crate::model::{family, Dims, BOUNDARY, CORRECT, DRIFT, INCORRECT, N_FAMILIES};
use crate::posterior::{coclustering_among, success_combos, summarize_curves, Draw, Parameter, PosteriorDraws};
use crate::random::task_rng;
use crate::random_effects::sample_re_prior;

/// How stimuli are assigned to trials within a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StimulusSchedule {
    /// Independent uniform draw per trial.
    #[default]
    Uniform,
    /// Each stimulus exactly `L / d0` times per block in random order.
    Balanced,
}

/// Complete description of a synthetic design and its true parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub n_subjects: usize,
    pub n_blocks: usize,
    pub n_trials: usize,
    pub n_categories: usize,
    /// Log drift spline coefficients `[x][k]`.
    pub drift: Vec<Vec<f64>>,
    /// Log boundary spline coefficients `[x][k]`.
    pub boundary: Vec<Vec<f64>>,
    /// True latent labels `[k][x]`; combinations sharing a label share curves locally.
    pub labels: Vec<Vec<u8>>,
    /// Random-effect variance components `(σ²_{u,a}, σ²_{u,s})` for drift then boundary;
    /// zero disables that parameter's random effects.
    pub re_variances: [f64; 4],
    /// Offsets are drawn uniformly from this interval for every subject and stimulus.
    pub offset_range: [f64; 2],
    #[serde(default)]
    pub schedule: StimulusSchedule,
}

impl ScenarioSpec {
    pub fn n_basis(&self) -> usize {
        self.n_blocks + 1
    }

    pub fn dims(&self) -> Result<Dims> {
        let zmax = self.labels.iter().flatten().copied().max().unwrap_or(0) as usize + 1;
        Dims::new(self.n_subjects, self.n_blocks, self.n_categories, zmax)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("scenario {}: {m}", self.name)));
        let dims = self.dims()?;
        let (nx, kn) = (dims.n_combos(), self.n_basis());
        if self.n_trials == 0 {
            return bad("n_trials must be positive".into());
        }
        for (what, table) in [("drift", &self.drift), ("boundary", &self.boundary)] {
            if table.len() != nx || table.iter().any(|r| r.len() != kn || r.iter().any(|v| !v.is_finite())) {
                return bad(format!("{what} needs {nx} rows of {kn} finite coefficients"));
            }
        }
        if self.labels.len() != kn || self.labels.iter().any(|r| r.len() != nx) {
            return bad(format!("labels need {kn} rows of {nx} entries"));
        }
        if self.re_variances.iter().any(|v| !(*v >= 0.0)) {
            return bad("random-effect variances must be non-negative".into());
        }
        let [lo, hi] = self.offset_range;
        if !(lo > 0.0 && hi >= lo) {
            return bad("offset range must satisfy 0 < lo <= hi".into());
        }
        if self.schedule == StimulusSchedule::Balanced && !self.n_trials.is_multiple_of(self.n_categories) {
            return bad("balanced schedules need n_trials divisible by the number of categories".into());
        }
        Ok(())
    }

    /// Built-in scenario by name.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "s7-default" => Ok(Self::tone_learning(20, 10, 40)),
            "s7-small" => Ok(Self::tone_learning(10, 10, 20)),
            _ => Err(Error::Config(format!(
                "unknown scenario '{name}' (built-in: s7-default, s7-small)"
            ))),
        }
    }

    /// Reads a TOML scenario file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Four-tone learning design. Success drifts rise together for the first
    /// half of training, then split into two groups (tones 1 and 3 keep
    /// improving, tones 2 and 4 level off). Errors share one curve except
    /// the confusions between tones 1 and 2, which have a higher boundary
    /// throughout. Values are chosen by hand to give plausible accuracies and
    /// response times.
    pub fn tone_learning(n_subjects: usize, n_blocks: usize, n_trials: usize) -> Self {
        let d0 = 4;
        let kn = n_blocks + 1;
        let split = kn / 2;
        let frac = |k: usize| k as f64 / (kn - 1) as f64;
        let fast = |k: usize| (0.9 + 2.1 * frac(k)).ln();
        let slow = |k: usize| if k < split { fast(k) } else { fast(split - 1) + 0.05 * (k - split + 1) as f64 };
        let mut drift = vec![vec![0.0; kn]; d0 * d0];
        let mut boundary = vec![vec![0.0; kn]; d0 * d0];
        let mut labels = vec![vec![0u8; d0 * d0]; kn];
        for s in 0..d0 {
            for d in 0..d0 {
                let x = s * d0 + d;
                for k in 0..kn {
                    let (mu, b, z) = if s == d {
                        let late_slow = k >= split && (s == 1 || s == 3);
                        if late_slow {
                            (slow(k), 1.5f64.ln(), 1)
                        } else {
                            (fast(k), 1.5f64.ln(), 0)
                        }
                    } else if (s, d) == (0, 1) || (s, d) == (1, 0) {
                        (0.7f64.ln(), 2.2f64.ln(), 3)
                    } else {
                        (0.7f64.ln(), 1.6f64.ln(), 2)
                    };
                    drift[x][k] = mu;
                    boundary[x][k] = b;
                    labels[k][x] = z;
                }
            }
        }
        Self {
            name: if (n_subjects, n_blocks, n_trials) == (20, 10, 40) {
                "s7-default".into()
            } else {
                format!("tone-learning-n{n_subjects}-t{n_blocks}-l{n_trials}")
            },
            n_subjects,
            n_blocks,
            n_trials,
            n_categories: d0,
            drift,
            boundary,
            labels,
            re_variances: [0.01, 0.01, 0.005, 0.005],
            offset_range: [0.15, 0.25],
            schedule: StimulusSchedule::Uniform,
        }
    }
}

/// Everything that generated a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub spec: ScenarioSpec,
    pub seed: u64,
    /// Random-effect coefficients `[(i * 4 + f) * K + k]`.
    pub random_effects: Vec<f64>,
    /// Offsets `[i * d0 + s]`.
    pub offsets: Vec<f64>,
}

impl TruthRecord {
    fn block_value(c: &[f64], w: [f64; 2], t: usize) -> f64 {
        w[0] * c[t] + w[1] * c[t + 1]
    }

    /// `log θ` of subject `i` at block `t` for stimulus `s` and decision `d`.
    pub fn log_param(&self, p: usize, i: usize, t: usize, s: usize, d: usize, weights: &[[f64; 2]]) -> f64 {
        let spec = &self.spec;
        let kn = spec.n_basis();
        let x = s * spec.n_categories + d;
        let table = if p == DRIFT { &spec.drift } else { &spec.boundary };
        let f = family(p, if s == d { CORRECT } else { INCORRECT });
        let o = (i * N_FAMILIES + f) * kn;
        Self::block_value(&table[x], weights[t], t) + Self::block_value(&self.random_effects[o..o + kn], weights[t], t)
    }

    /// True population curve `exp(f(t) + var_i(u_i(t)) / 2)` on `grid`, using
    /// the same cross-subject variance as the posterior estimator.
    pub fn population_curve(&self, x: usize, which: Parameter, grid: &[f64]) -> Result<Vec<f64>> {
        let dims = self.spec.dims()?;
        let d = PosteriorDraws::new(dims, vec![self.as_draw(&dims)]);
        Ok(d.population_curves(x, which, grid)?.remove(0))
    }

    fn as_draw(&self, dims: &Dims) -> Draw {
        Draw {
            iteration: 0,
            log_lik: 0.0,
            expressed: [self.spec.drift.concat(), self.spec.boundary.concat()],
            latent: self.spec.labels.concat(),
            offsets: self.offsets.clone(),
            smoothness: [1.0; 2],
            re_variances: self.spec.re_variances,
            concentration: [1.0; 2],
            transitions: [vec![0.0; dims.z_max * dims.z_max], vec![0.0; dims.z_max * dims.z_max]],
            random_effects: self.random_effects.clone(),
        }
    }
}

/// Simulates a dataset from `spec`; subjects run in parallel on streams derived from `seed`.
pub fn generate_dataset(spec: &ScenarioSpec, seed: u64) -> Result<(Dataset, TruthRecord)> {
    spec.validate()?;
    let (n, t_max, l_max, d0) = (spec.n_subjects, spec.n_blocks, spec.n_trials, spec.n_categories);
    let kn = spec.n_basis();
    let weights = crate::bspline::SplineBasis::for_blocks(t_max)?.block_weights();

    let mut re_rng = task_rng(seed, u64::MAX);
    let mut random_effects = vec![0.0; n * N_FAMILIES * kn];
    for i in 0..n {
        for f in 0..N_FAMILIES {
            let p = f / 2;
            let (va, vs) = (spec.re_variances[2 * p], spec.re_variances[2 * p + 1]);
            if va > 0.0 && vs > 0.0 {
                let u = sample_re_prior(va, vs, kn, &mut re_rng)?;
                random_effects[(i * N_FAMILIES + f) * kn..(i * N_FAMILIES + f + 1) * kn].copy_from_slice(&u);
            }
        }
    }
    let [lo, hi] = spec.offset_range;
    let offsets: Vec<f64> = (0..n * d0)
        .map(|_| if hi > lo { re_rng.random_range(lo..hi) } else { lo })
        .collect();
    let truth = TruthRecord {
        spec: spec.clone(),
        seed,
        random_effects,
        offsets,
    };

    let per_subject: Vec<Vec<TrialRecord>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = task_rng(seed, i as u64);
            let mut out = Vec::with_capacity(t_max * l_max);
            for t in 0..t_max {
                let stimuli: Vec<usize> = match spec.schedule {
                    StimulusSchedule::Uniform => (0..l_max).map(|_| rng.random_range(0..d0)).collect(),
                    StimulusSchedule::Balanced => {
                        let mut v: Vec<usize> = (0..l_max).map(|l| l % d0).collect();
                        v.shuffle(&mut rng);
                        v
                    }
                };
                for (l, &s) in stimuli.iter().enumerate() {
                    let mu = (0..d0).map(|d| truth.log_param(DRIFT, i, t, s, d, &weights).exp()).collect();
                    let b = (0..d0).map(|d| truth.log_param(BOUNDARY, i, t, s, d, &weights).exp()).collect();
                    let rp = RaceParams::new(truth.offsets[i * d0 + s], mu, b)?;
                    let (d, rt) = simulate_trial(&rp, &mut rng);
                    out.push(TrialRecord {
                        subject: i,
                        block: t,
                        trial: l,
                        stimulus: s,
                        response: d,
                        rt,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let sizes = DesignOverride {
        subjects: Some(n),
        blocks: Some(t_max),
        trials: Some(l_max),
        categories: Some(d0),
    };
    let ds = Dataset::new(per_subject.concat(), sizes)?;
    Ok((ds, truth))
}

/// Recovery of one population curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecovery {
    pub parameter: Parameter,
    pub stimulus: usize,
    pub decision: usize,
    /// Fraction of grid points whose credible band covers the true curve.
    pub coverage: f64,
    /// Mean of `|posterior mean - truth| / truth` over the grid.
    pub mean_abs_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub curves: Vec<CurveRecovery>,
    /// Per block: fraction of success-combination pairs on which the modal
    /// posterior co-clustering (probability > 1/2) matches the truth.
    pub coclustering_agreement: Vec<f64>,
}

impl RecoveryReport {
    /// Number of combinations whose drift and boundary coverage both reach `min_coverage`.
    pub fn combos_covered(&self, min_coverage: f64) -> usize {
        let mut ok = std::collections::BTreeMap::new();
        for c in &self.curves {
            let e = ok.entry((c.stimulus, c.decision)).or_insert(true);
            *e &= c.coverage >= min_coverage;
        }
        ok.values().filter(|&&v| v).count()
    }

    pub fn mean_agreement(&self) -> f64 {
        self.coclustering_agreement.iter().sum::<f64>() / self.coclustering_agreement.len().max(1) as f64
    }
}

/// Scores posterior population curves and co-clustering against the truth.
pub fn recovery_score(truth: &TruthRecord, draws: &PosteriorDraws, per_interval: usize, level: f64) -> Result<RecoveryReport> {
    let dims = truth.spec.dims()?;
    let pd = draws.dims;
    if (pd.n_subjects, pd.n_blocks, pd.n_categories) != (dims.n_subjects, dims.n_blocks, dims.n_categories) {
        return Err(Error::InvalidArgument("draws and truth have different designs".into()));
    }
    let grid = draws.dense_grid(per_interval);
    let mut curves = Vec::new();
    for which in [Parameter::Drift, Parameter::Boundary] {
        for x in 0..dims.n_combos() {
            let true_curve = truth.population_curve(x, which, &grid)?;
            let s = summarize_curves(&grid, &draws.population_curves(x, which, &grid)?, level);
            let g = grid.len() as f64;
            let coverage = (0..grid.len())
                .filter(|&j| s.lower[j] <= true_curve[j] && true_curve[j] <= s.upper[j])
                .count() as f64
                / g;
            let err = (0..grid.len()).map(|j| (s.mean[j] - true_curve[j]).abs() / true_curve[j]).sum::<f64>() / g;
            let (st, de) = dims.split_combo(x);
            curves.push(CurveRecovery {
                parameter: which,
                stimulus: st,
                decision: de,
                coverage,
                mean_abs_rel_error: err,
            });
        }
    }

    let combos = success_combos(&dims);
    let m = combos.len();
    let nx = dims.n_combos();
    let labels = truth.spec.labels.concat();
    let mut agreement = Vec::with_capacity(dims.n_blocks);
    for t in 0..dims.n_blocks {
        let probs = coclustering_among(draws, t, &combos)?;
        let (mut hits, mut pairs) = (0, 0);
        for a in 0..m {
            for b in a + 1..m {
                let (xa, xb) = (combos[a], combos[b]);
                let same = labels[t * nx + xa] == labels[t * nx + xb]
                    && labels[(t + 1) * nx + xa] == labels[(t + 1) * nx + xb];
                let modal = probs[a * m + b] > 0.5;
                pairs += 1;
                if same == modal {
                    hits += 1;
                }
            }
        }
        agreement.push(if pairs == 0 { 1.0 } else { hits as f64 / pairs as f64 });
    }
    Ok(RecoveryReport {
        curves,
        coclustering_agreement: agreement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_sizes() {
        let spec = ScenarioSpec::builtin("s7-default").unwrap();
        spec.validate().unwrap();
        let (ds, truth) = generate_dataset(&spec, 7).unwrap();
        assert_eq!(ds.len(), 8000);
        assert_eq!(truth.offsets.len(), 80);
        for r in ds.records() {
            assert!(r.rt > truth.offsets[r.subject * 4 + r.stimulus]);
        }
        assert!(ScenarioSpec::builtin("nope").is_err());
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = ScenarioSpec::tone_learning(3, 4, 8);
        let dir = tempfile::tempdir().unwrap();
        let (a, _) = generate_dataset(&spec, 3).unwrap();
        let (b, _) = generate_dataset(&spec, 3).unwrap();
        a.write_csv(&dir.path().join("a.csv")).unwrap();
        b.write_csv(&dir.path().join("b.csv")).unwrap();
        assert_eq!(
            std::fs::read(dir.path().join("a.csv")).unwrap(),
            std::fs::read(dir.path().join("b.csv")).unwrap()
        );
    }

    #[test]
    fn dominant_success_drift_gives_high_accuracy() {
        let mut spec = ScenarioSpec::tone_learning(4, 3, 200);
        spec.re_variances = [0.0; 4];
        for x in 0..16 {
            let v = if x % 5 == 0 { 4.0f64.ln() } else { 0.3f64.ln() };
            spec.drift[x] = vec![v; 4];
            spec.boundary[x] = vec![1.5f64.ln(); 4];
        }
        let (ds, _) = generate_dataset(&spec, 1).unwrap();
        for t in 0..3 {
            let recs: Vec<_> = ds.records().iter().filter(|r| r.block == t).collect();
            let acc = recs.iter().filter(|r| r.response == r.stimulus).count() as f64 / recs.len() as f64;
            assert!(acc > 0.9, "block {t}: {acc}");
        }
    }

    #[test]
    fn balanced_schedule_counts() {
        let mut spec = ScenarioSpec::tone_learning(2, 3, 8);
        spec.schedule = StimulusSchedule::Balanced;
        let (ds, _) = generate_dataset(&spec, 2).unwrap();
        for t in 0..3 {
            for s in 0..4 {
                assert_eq!(ds.trials_of_block_stimulus(t, s).len(), 2 * 2);
            }
        }
        spec.n_trials = 6;
        assert!(spec.validate().is_err());
    }

    fn truth_draws(truth: &TruthRecord, m: usize) -> PosteriorDraws {
        let dims = truth.spec.dims().unwrap();
        PosteriorDraws::new(dims, (0..m).map(|_| truth.as_draw(&dims)).collect::<Vec<Draw>>())
    }

    #[test]
    fn draws_at_truth_score_perfectly() {
        let spec = ScenarioSpec::tone_learning(3, 4, 8);
        let (_, truth) = generate_dataset(&spec, 5).unwrap();
        let rep = recovery_score(&truth, &truth_draws(&truth, 3), 5, 0.9).unwrap();
        assert!(rep.curves.iter().all(|c| c.coverage == 1.0 && c.mean_abs_rel_error < 1e-12));
        assert_eq!(rep.combos_covered(0.8), 16);
        assert!(rep.coclustering_agreement.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn noisy_draws_cover_near_nominal() {
        // Each replicate centres its draws at truth + b with b ~ N(0, 0.2²) and
        // spreads them by N(0, 0.2²), so the band covers the truth exactly when
        // |b| is below the 95% normal quantile times 0.2: probability 0.9.
        let spec = ScenarioSpec {
            re_variances: [0.0; 4],
            ..ScenarioSpec::tone_learning(3, 4, 8)
        };
        let (_, truth) = generate_dataset(&spec, 5).unwrap();
        let mut rng = task_rng(8, 0);
        let mut hits = 0;
        let reps = 200;
        for _ in 0..reps {
            let mut d = truth_draws(&truth, 400);
            let b: f64 = rng.sample(rand_distr::StandardNormal);
            for dr in d.draws.iter_mut() {
                let e: f64 = rng.sample(rand_distr::StandardNormal);
                dr.expressed[0].iter_mut().for_each(|v| *v += 0.2 * (b + e));
            }
            let rep = recovery_score(&truth, &d, 2, 0.9).unwrap();
            if rep.curves[0].coverage == 1.0 {
                hits += 1;
            }
        }
        let rate = hits as f64 / reps as f64;
        assert!((rate - 0.9).abs() < 0.07, "{rate}");
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let spec = ScenarioSpec::tone_learning(3, 4, 8);
        let (_, truth) = generate_dataset(&spec, 5).unwrap();
        let other = crate::posterior::fixtures::fixture(3, 5, 4, 2);
        assert!(recovery_score(&truth, &other, 5, 0.9).is_err());
    }
}
