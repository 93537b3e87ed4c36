//! Standard normal helpers with tail-stable evaluation.

use libm::erfc;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

#[inline]
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

#[inline]
pub fn log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Φ(x)`, accurate in both tails.
pub fn log_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-cdf(-x)).ln_1p()
    } else if x > -8.0 {
        cdf(x).ln()
    } else {
        log_pdf(x) + mills_ratio(-x).ln()
    }
}

/// Mills ratio `R(x) = Φ(-x) / φ(x)`.
pub fn mills_ratio(x: f64) -> f64 {
    if x < 8.0 {
        // exp(x²/2) stays finite for x < 8 and erfc keeps relative accuracy there.
        0.5 * erfc(x / std::f64::consts::SQRT_2) * SQRT_2PI * (0.5 * x * x).exp()
    } else {
        // Laplace continued fraction 1/(x+1/(x+2/(x+3/(x+...)))), evaluated backward.
        let mut tail = 0.0;
        for n in (1..=60).rev() {
            tail = n as f64 / (x + tail);
        }
        1.0 / (x + tail)
    }
}

/// Natural log of `exp(a) + exp(b)` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Log density of `Normal(mean, var)` at `x`.
#[inline]
pub fn normal_log_density(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * d * d / var - 0.5 * var.ln() - LN_SQRT_2PI
}

/// Log density of the half-Cauchy `C⁺(0, scale)` at `x > 0`.
#[inline]
pub fn half_cauchy_log_density(x: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let r = x / scale;
    (2.0 / (std::f64::consts::PI * scale)).ln() - r.mul_add(r, 1.0).ln()
}
