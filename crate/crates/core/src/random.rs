//! Random-number plumbing shared by the samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

/// Independent stream `stream` derived from `seed`. Parallel tasks use one
/// stream each so results do not depend on scheduling.
pub fn task_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Index drawn with probability proportional to `exp(log_weights[i])`.
///
/// Panics when every weight is `-inf` or NaN.
pub fn sample_log_categorical<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(m.is_finite(), "categorical weights have no finite entry");
    let total: f64 = log_weights.iter().map(|w| (w - m).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in log_weights.iter().enumerate() {
        let p = (w - m).exp();
        if p > 0.0 {
            last = i;
            if u < p {
                return i;
            }
            u -= p;
        }
    }
    last
}

/// Logarithm of a `Gamma(shape, 1)` draw, accurate for tiny shapes.
pub fn log_gamma_sample<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).expect("positive shape").sample(rng).ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng).ln();
        let u: f64 = rng.random::<f64>();
        g + u.max(f64::MIN_POSITIVE).ln() / shape
    }
}

/// Log of a Dirichlet draw with the given concentration parameters.
pub fn log_dirichlet_sample<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alpha.iter().map(|&a| log_gamma_sample(a, rng)).collect();
    let norm = crate::normal::log_sum_exp(&logs);
    logs.iter().map(|l| l - norm).collect()
}
