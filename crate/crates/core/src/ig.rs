//! Inverse Gaussian first-passage times and the independent race likelihood.
//!
//! Every accumulator is a unit-variance Wiener process with drift `mu` that
//! starts at zero after a shared non-decision offset `delta` and finishes at
//! boundary `b`. The first accumulator to finish determines the response.

use rand::Rng;
use rand_distr::{Distribution, InverseGaussian};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::normal::{self, LN_SQRT_2PI};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccumulatorParams {
    pub delta: f64,
    pub mu: f64,
    pub b: f64,
}

impl AccumulatorParams {
    pub fn new(delta: f64, mu: f64, b: f64) -> Result<Self> {
        if !(mu > 0.0 && b > 0.0 && delta >= 0.0) || !(mu.is_finite() && b.is_finite() && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "accumulator needs mu > 0, b > 0, delta >= 0; got mu={mu}, b={b}, delta={delta}"
            )));
        }
        Ok(Self { delta, mu, b })
    }

    /// Mean first-passage time after the offset, `b / mu`.
    pub fn mean_decision_time(&self) -> f64 {
        self.b / self.mu
    }

    /// Variance of the first-passage time, `b / mu³`.
    pub fn decision_time_variance(&self) -> f64 {
        self.b / (self.mu * self.mu * self.mu)
    }
}

/// All accumulators racing under one stimulus, sharing a single offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceParams {
    pub delta: f64,
    pub mu: Vec<f64>,
    pub b: Vec<f64>,
}

impl RaceParams {
    pub fn new(delta: f64, mu: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if mu.len() != b.len() || mu.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "race needs matching nonempty drift and boundary vectors, got {} and {}",
                mu.len(),
                b.len()
            )));
        }
        for (&m, &bb) in mu.iter().zip(&b) {
            AccumulatorParams::new(delta, m, bb)?;
        }
        Ok(Self { delta, mu, b })
    }

    pub fn n_accumulators(&self) -> usize {
        self.mu.len()
    }

    pub fn accumulator(&self, d: usize) -> AccumulatorParams {
        AccumulatorParams {
            delta: self.delta,
            mu: self.mu[d],
            b: self.b[d],
        }
    }
}

/// Log density of the first-passage time `u` (offset already removed).
#[inline]
pub fn log_pdf_decision(u: f64, mu: f64, b: f64) -> f64 {
    if !(u > 0.0) {
        return f64::NEG_INFINITY;
    }
    let r = b - mu * u;
    b.ln() - LN_SQRT_2PI - 1.5 * u.ln() - r * r / (2.0 * u)
}

/// `(G(u), 1 - G(u))` computed without cancellation in either tail.
fn cdf_and_survival(u: f64, mu: f64, b: f64) -> (f64, f64) {
    let su = u.sqrt();
    let x1 = (mu * u - b) / su;
    let x2 = (mu * u + b) / su;
    // e^{2μb} Φ(-x2) = φ(x1) R(x2) because x2² - x1² = 4μb.
    if x1 >= 0.0 {
        let s = normal::pdf(x1) * (normal::mills_ratio(x1) - normal::mills_ratio(x2));
        (1.0 - s, s)
    } else {
        let g = normal::cdf(x1) + normal::pdf(x1) * normal::mills_ratio(x2);
        (g, 1.0 - g)
    }
}

/// Log survival `ln(1 - G(u))` of the first-passage time `u`.
#[inline]
pub fn log_survival_decision(u: f64, mu: f64, b: f64) -> f64 {
    if !(u > 0.0) {
        return 0.0;
    }
    let su = u.sqrt();
    let x1 = (mu * u - b) / su;
    let x2 = (mu * u + b) / su;
    if x1 >= 0.0 {
        normal::log_pdf(x1) + (normal::mills_ratio(x1) - normal::mills_ratio(x2)).ln()
    } else {
        let g = normal::cdf(x1) + normal::pdf(x1) * normal::mills_ratio(x2);
        (-g).ln_1p()
    }
}

/// Log density of the response time `tau`; `-inf` when `tau <= delta`.
pub fn ig_log_pdf(p: &AccumulatorParams, tau: f64) -> f64 {
    log_pdf_decision(tau - p.delta, p.mu, p.b)
}

/// Distribution function of the response time; `0` when `tau <= delta`.
pub fn ig_cdf(p: &AccumulatorParams, tau: f64) -> f64 {
    let u = tau - p.delta;
    if !(u > 0.0) {
        return 0.0;
    }
    cdf_and_survival(u, p.mu, p.b).0.clamp(0.0, 1.0)
}

pub fn ig_log_survival(p: &AccumulatorParams, tau: f64) -> f64 {
    log_survival_decision(tau - p.delta, p.mu, p.b)
}

/// Joint log density of response `d` (0-based) at time `tau`.
pub fn race_log_lik(rp: &RaceParams, d: usize, tau: f64) -> f64 {
    let u = tau - rp.delta;
    if !(u > 0.0) {
        return f64::NEG_INFINITY;
    }
    let mut total = 0.0;
    for a in 0..rp.n_accumulators() {
        total += if a == d {
            log_pdf_decision(u, rp.mu[a], rp.b[a])
        } else {
            log_survival_decision(u, rp.mu[a], rp.b[a])
        };
    }
    total
}

/// Per-trial race parameters indexed by subject, block, stimulus and accumulator (all 0-based).
pub trait ParamSurface {
    fn offset(&self, subject: usize, stimulus: usize) -> f64;
    /// `(mu, b)` of accumulator `decision`.
    fn accumulator(&self, subject: usize, block: usize, stimulus: usize, decision: usize) -> (f64, f64);
}

/// Sum of race log-likelihoods over all trials, or over `subset` (trial indices) when given.
pub fn dataset_log_lik<P: ParamSurface + ?Sized>(ds: &Dataset, params: &P, subset: Option<&[usize]>) -> f64 {
    let d0 = ds.n_categories();
    let trial_ll = |idx: usize| {
        let r = &ds.records()[idx];
        let u = r.rt - params.offset(r.subject, r.stimulus);
        if !(u > 0.0) {
            return f64::NEG_INFINITY;
        }
        let mut ll = 0.0;
        for a in 0..d0 {
            let (mu, b) = params.accumulator(r.subject, r.block, r.stimulus, a);
            ll += if a == r.response {
                log_pdf_decision(u, mu, b)
            } else {
                log_survival_decision(u, mu, b)
            };
        }
        ll
    };
    match subset {
        Some(ids) => ids.iter().map(|&i| trial_ll(i)).sum(),
        None => (0..ds.len()).map(trial_ll).sum(),
    }
}

/// One first-passage draw: inverse Gaussian with mean `b/mu` and shape `b²`, shifted by `delta`.
pub fn sample_first_passage<R: Rng + ?Sized>(p: &AccumulatorParams, rng: &mut R) -> f64 {
    let dist = InverseGaussian::new(p.b / p.mu, p.b * p.b).expect("validated accumulator");
    loop {
        let u: f64 = dist.sample(rng);
        if u > 0.0 && u.is_finite() {
            return p.delta + u;
        }
    }
}

/// Runs the race once and returns the winning accumulator (0-based) and its time.
pub fn simulate_trial<R: Rng + ?Sized>(rp: &RaceParams, rng: &mut R) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for d in 0..rp.n_accumulators() {
        let t = sample_first_passage(&rp.accumulator(d), rng);
        if t < best.1 {
            best = (d, t);
        }
    }
    best
}

/// Upper integration limit beyond which every racer has finished with
/// probability at least `1 - 1e-14`.
fn race_horizon(rp: &RaceParams) -> f64 {
    let mut q = rp
        .mu
        .iter()
        .zip(&rp.b)
        .map(|(m, b)| b / m)
        .fold(f64::INFINITY, f64::min)
        .max(1e-6);
    loop {
        let log_surv: f64 = rp
            .mu
            .iter()
            .zip(&rp.b)
            .map(|(&m, &b)| log_survival_decision(q, m, b))
            .sum();
        if log_surv < -32.0 || q > 1e9 {
            return q;
        }
        q *= 2.0;
    }
}

/// Geometric breakpoints on `(0, q]` that resolve the sharp rise of the density near zero.
fn breakpoints(q: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..40).map(|j| q * 0.5f64.powi(j)).collect();
    pts.push(0.0);
    pts.reverse();
    pts
}

/// Probability that accumulator `d` wins with a response time in `(lo, hi]`.
pub fn race_interval_probability(rp: &RaceParams, d: usize, lo: f64, hi: f64) -> f64 {
    let a = (lo - rp.delta).max(0.0);
    let b = hi - rp.delta;
    if b <= a {
        return 0.0;
    }
    let density = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        race_log_lik(rp, d, u + rp.delta).exp()
    };
    let mut total = 0.0;
    let pts = breakpoints(b);
    for w in pts.windows(2) {
        let (l, r) = (w[0].max(a), w[1]);
        if r > l {
            total += quadrature::integrate(density, l, r, 1e-12);
        }
    }
    total
}

/// Marginal probability that accumulator `d` wins the race.
pub fn choice_probability(rp: &RaceParams, d: usize) -> f64 {
    let q = race_horizon(rp);
    race_interval_probability(rp, d, rp.delta, rp.delta + q)
}

/// Integral of the single-accumulator density over `(delta, delta + q]` with the same scheme.
pub fn ig_mass(p: &AccumulatorParams, q: f64) -> f64 {
    let pts = breakpoints(q);
    pts.windows(2)
        .map(|w| quadrature::integrate(|u| log_pdf_decision(u, p.mu, p.b).exp(), w[0], w[1], 1e-12))
        .sum()
}
