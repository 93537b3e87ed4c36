//! Linear ballistic accumulator baseline, fitted block by block by maximum
//! likelihood.
//!
//! Accumulator `d` under stimulus `s` rises linearly from zero with a slope
//! drawn from `N(m_d, v_d)` and responds when it reaches `b_s`, so its
//! finishing time has cdf `F(τ) = 1 - Φ((b/τ - m) / √v)`. Negative slopes
//! never finish; the distribution is defective and is used without
//! renormalisation.

use std::fs;
use std::path::Path;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::normal::{cdf, log_cdf, log_pdf, pdf};
use crate::random::task_rng;

/// Lower bound added to every slope variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("response time must be positive, got {tau}")))
    }
}

/// Finishing-time cdf of one accumulator.
pub fn lba_cdf(b: f64, m: f64, v: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(1.0 - cdf((b / tau - m) / v.sqrt()))
}

/// Finishing-time density of one accumulator.
pub fn lba_pdf(b: f64, m: f64, v: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let sd = v.sqrt();
    Ok(pdf((b / tau - m) / sd) / sd * b / (tau * tau))
}

fn log_density(b: f64, m: f64, v: f64, tau: f64) -> f64 {
    log_pdf((b / tau - m) / v.sqrt()) - 0.5 * v.ln() + b.ln() - 2.0 * tau.ln()
}

fn log_survival(b: f64, m: f64, v: f64, tau: f64) -> f64 {
    log_cdf((b / tau - m) / v.sqrt())
}

/// Parameters of all accumulators under one stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbaStimulusParams {
    pub b: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl LbaStimulusParams {
    pub fn new(b: f64, m: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if !(b > 0.0) || m.len() != v.len() || m.len() < 2 || v.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidArgument(
                "LBA needs b > 0, positive variances and matching slope vectors of length >= 2".into(),
            ));
        }
        Ok(Self { b, m, v })
    }

    /// Log-likelihood of response `d` at decision time `tau`.
    pub fn trial_log_lik(&self, d: usize, tau: f64) -> f64 {
        if !(tau > 0.0) {
            return f64::NEG_INFINITY;
        }
        (0..self.m.len())
            .map(|j| {
                if j == d {
                    log_density(self.b, self.m[j], self.v[j], tau)
                } else {
                    log_survival(self.b, self.m[j], self.v[j], tau)
                }
            })
            .sum()
    }
}

/// Parameters of one block, one entry per stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbaParams {
    pub stimuli: Vec<LbaStimulusParams>,
}

/// Log-likelihood of the block-`t` trials of stimulus `s`. `offset` is subtracted from every rt.
pub fn lba_stimulus_loglik(ds: &Dataset, t: usize, s: usize, sp: &LbaStimulusParams, offset: f64) -> f64 {
    ds.trials_of_block_stimulus(t, s)
        .iter()
        .map(|&idx| {
            let r = &ds.records()[idx];
            sp.trial_log_lik(r.response, r.rt - offset)
        })
        .sum()
}

/// Log-likelihood of all block-`t` trials (0-based `t`).
pub fn lba_block_loglik(ds: &Dataset, t: usize, params: &LbaParams, offsets: &[f64]) -> f64 {
    params
        .stimuli
        .iter()
        .enumerate()
        .map(|(s, sp)| lba_stimulus_loglik(ds, t, s, sp, offsets.get(s).copied().unwrap_or(0.0)))
        .sum()
}

/// Simulates one trial; returns `(decision, rt)`. Trials on which no slope is
/// positive are redrawn.
pub fn simulate_lba_trial<R: Rng + ?Sized>(sp: &LbaStimulusParams, offset: f64, rng: &mut R) -> (usize, f64) {
    loop {
        let mut best = (usize::MAX, f64::INFINITY);
        for (d, (&m, &v)) in sp.m.iter().zip(&sp.v).enumerate() {
            let e: f64 = rng.sample(StandardNormal);
            let k = m + v.sqrt() * e;
            if k > 0.0 {
                let tau = sp.b / k;
                if tau < best.1 {
                    best = (d, tau);
                }
            }
        }
        if best.0 != usize::MAX {
            return (best.0, best.1 + offset);
        }
    }
}

/// How slope variances are parameterised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMode {
    /// One variance per accumulator.
    #[default]
    Free,
    /// One variance shared by the accumulators of a stimulus.
    Shared,
    /// Every variance fixed to the given value.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbaOptions {
    pub restarts: usize,
    pub seed: u64,
    pub variance: VarianceMode,
    /// Per-stimulus constant subtracted from response times.
    pub offsets: Option<Vec<f64>>,
    pub max_iters: u64,
}

impl Default for LbaOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            seed: 1,
            variance: VarianceMode::Free,
            offsets: None,
            max_iters: 4000,
        }
    }
}

/// Outcome of one random start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub restart: usize,
    pub start_log_lik: f64,
    pub log_lik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusFit {
    pub params: LbaStimulusParams,
    pub log_lik: f64,
    pub restarts: Vec<RestartRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockFit {
    /// 0-based block index.
    pub block: usize,
    pub stimuli: Vec<StimulusFit>,
    pub log_lik: f64,
}

impl BlockFit {
    pub fn params(&self) -> LbaParams {
        LbaParams {
            stimuli: self.stimuli.iter().map(|f| f.params.clone()).collect(),
        }
    }
}

/// Unconstrained coordinates: `[ln b, m_1..m_D, variance coordinates]`.
struct Layout {
    d0: usize,
    mode: VarianceMode,
}

impl Layout {
    fn dim(&self) -> usize {
        1 + self.d0
            + match self.mode {
                VarianceMode::Free => self.d0,
                VarianceMode::Shared => 1,
                VarianceMode::Fixed(_) => 0,
            }
    }

    fn decode(&self, x: &[f64]) -> LbaStimulusParams {
        let v = match self.mode {
            VarianceMode::Free => x[1 + self.d0..].iter().map(|l| VARIANCE_FLOOR + l.exp()).collect(),
            VarianceMode::Shared => vec![VARIANCE_FLOOR + x[1 + self.d0].exp(); self.d0],
            VarianceMode::Fixed(v) => vec![v; self.d0],
        };
        LbaStimulusParams {
            b: x[0].exp(),
            m: x[1..1 + self.d0].to_vec(),
            v,
        }
    }

    fn random_start<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        x.push(rng.random_range(0.3f64.ln()..3.0f64.ln()));
        for _ in 0..self.d0 {
            x.push(rng.random_range(0.2..3.0));
        }
        for _ in 1 + self.d0..self.dim() {
            x.push(rng.random_range(0.05f64.ln()..2.0f64.ln()));
        }
        x
    }
}

#[derive(Clone, Copy)]
struct NegLogLik<'a> {
    ds: &'a Dataset,
    t: usize,
    s: usize,
    offset: f64,
    layout: &'a Layout,
}

impl NegLogLik<'_> {
    fn log_lik(&self, x: &[f64]) -> f64 {
        lba_stimulus_loglik(self.ds, self.t, self.s, &self.layout.decode(x), self.offset)
    }
}

impl CostFunction for NegLogLik<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let ll = self.log_lik(x);
        Ok(if ll.is_finite() { -ll } else { f64::MAX })
    }
}

fn nelder_mead(cost: &NegLogLik<'_>, x0: Vec<f64>, max_iters: u64) -> Result<Vec<f64>> {
    let mut simplex = vec![x0.clone()];
    for j in 0..x0.len() {
        let mut v = x0.clone();
        v[j] += 0.25;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-10)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let res = Executor::new(*cost, solver)
            .configure(|st| st.max_iters(max_iters))
        .run()
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(res.state().get_best_param().cloned().unwrap_or(x0))
}

/// Best of `opts.restarts` local fits for the trials of stimulus `s` in block `t`.
pub fn fit_stimulus(ds: &Dataset, t: usize, s: usize, opts: &LbaOptions) -> Result<StimulusFit> {
    if ds.trials_of_block_stimulus(t, s).is_empty() {
        return Err(Error::InvalidArgument(format!("block {} has no trials for stimulus {}", t + 1, s + 1)));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    let layout = Layout {
        d0: ds.n_categories(),
        mode: opts.variance,
    };
    let offset = opts.offsets.as_ref().and_then(|o| o.get(s).copied()).unwrap_or(0.0);
    let cost = NegLogLik { ds, t, s, offset, layout: &layout };
    let stream_base = ((t as u64) << 40) | ((s as u64) << 20);
    let results: Vec<(Vec<f64>, RestartRecord)> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = task_rng(opts.seed, stream_base | r as u64);
            let mut x0 = layout.random_start(&mut rng);
            let mut start = cost.log_lik(&x0);
            let mut tries = 0;
            while !start.is_finite() && tries < 100 {
                x0 = layout.random_start(&mut rng);
                start = cost.log_lik(&x0);
                tries += 1;
            }
            // A second simplex from the first optimum polishes stalled runs.
            let x1 = nelder_mead(&cost, x0, opts.max_iters)?;
            let x2 = nelder_mead(&cost, x1, opts.max_iters)?;
            let ll = cost.log_lik(&x2);
            Ok((
                x2,
                RestartRecord {
                    restart: r,
                    start_log_lik: start,
                    log_lik: ll,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let best = results
        .iter()
        .enumerate()
        .filter(|(_, (_, rec))| rec.log_lik.is_finite())
        .max_by(|a, b| a.1 .1.log_lik.total_cmp(&b.1 .1.log_lik).then(b.0.cmp(&a.0)))
        .map(|(j, _)| j)
        .ok_or_else(|| Error::Numerical(format!("no finite LBA fit for block {} stimulus {}", t + 1, s + 1)))?;
    let params = layout.decode(&results[best].0);
    let log_lik = results[best].1.log_lik;
    Ok(StimulusFit {
        params,
        log_lik,
        restarts: results.into_iter().map(|(_, r)| r).collect(),
    })
}

/// Fits block `t` (0-based). Stimuli have disjoint parameters, so each is
/// maximised separately and the block log-likelihood is their sum.
pub fn fit_block(ds: &Dataset, t: usize, opts: &LbaOptions) -> Result<BlockFit> {
    if t >= ds.n_blocks() {
        return Err(Error::InvalidArgument(format!("block {} out of range", t + 1)));
    }
    let stimuli = (0..ds.n_categories())
        .into_par_iter()
        .map(|s| fit_stimulus(ds, t, s, opts))
        .collect::<Result<Vec<_>>>()?;
    let log_lik = stimuli.iter().map(|f| f.log_lik).sum();
    Ok(BlockFit { block: t, stimuli, log_lik })
}

pub fn fit_all_blocks(ds: &Dataset, opts: &LbaOptions) -> Result<Vec<BlockFit>> {
    (0..ds.n_blocks()).into_par_iter().map(|t| fit_block(ds, t, opts)).collect()
}

/// Writes `lba_estimates.csv` and `lba_restarts.csv` into `dir`.
pub fn write_lba_csv(fits: &[BlockFit], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut est = String::from("block,stimulus,decision,m,v,b,log_lik\n");
    let mut rst = String::from("block,stimulus,restart,start_log_lik,log_lik\n");
    for f in fits {
        for (s, sf) in f.stimuli.iter().enumerate() {
            for d in 0..sf.params.m.len() {
                est += &format!(
                    "{},{},{},{},{},{},{}\n",
                    f.block + 1,
                    s + 1,
                    d + 1,
                    sf.params.m[d],
                    sf.params.v[d],
                    sf.params.b,
                    sf.log_lik
                );
            }
            for r in &sf.restarts {
                rst += &format!("{},{},{},{},{}\n", f.block + 1, s + 1, r.restart + 1, r.start_log_lik, r.log_lik);
            }
        }
    }
    let p = dir.join("lba_estimates.csv");
    fs::write(&p, est).map_err(|e| Error::io(&p, e))?;
    let p = dir.join("lba_restarts.csv");
    fs::write(&p, rst).map_err(|e| Error::io(&p, e))
}

/// Simulated LBA dataset: one subject, `n_blocks` blocks of `trials` trials,
/// stimulus `s` on trial `l` is `l mod d0`. `params[s]` gives each stimulus.
pub fn simulate_lba_dataset(params: &[LbaStimulusParams], n_blocks: usize, trials: usize, seed: u64) -> Result<Dataset> {
    let d0 = params.len();
    let mut rng = task_rng(seed, 0);
    let mut recs = Vec::with_capacity(n_blocks * trials);
    for t in 0..n_blocks {
        for l in 0..trials {
            let s = l % d0;
            let (d, rt) = simulate_lba_trial(&params[s], 0.0, &mut rng);
            recs.push(crate::data::TrialRecord {
                subject: 0,
                block: t,
                trial: l,
                stimulus: s,
                response: d,
                rt,
            });
        }
    }
    Dataset::new(recs, Default::default())
}
