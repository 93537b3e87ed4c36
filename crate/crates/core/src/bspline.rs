//! Clamped uniform quadratic B-spline basis.
//!
//! The knot sequence is `A, A, A, A+δ, …, B-δ, B, B, B` with `n_sub` equal
//! subintervals, which yields `n_sub + 2` basis functions. With knots at the
//! experiment blocks `1..=T` the basis has `T + 1` members and the value of a
//! spline at block `t` depends only on coefficients `t` and `t + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    lower: f64,
    upper: f64,
    n_sub: usize,
}

impl SplineBasis {
    pub fn new(lower: f64, upper: f64, n_sub: usize) -> Result<Self> {
        if n_sub == 0 || !(upper > lower) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "spline basis needs lower < upper and at least one subinterval, got [{lower}, {upper}] with {n_sub}"
            )));
        }
        Ok(Self {
            lower,
            upper,
            n_sub,
        })
    }

    /// Basis with interior knots at every block `1..=blocks`.
    pub fn for_blocks(blocks: usize) -> Result<Self> {
        if blocks < 2 {
            return Err(Error::InvalidArgument(format!(
                "at least 2 blocks are needed for a spline basis, got {blocks}"
            )));
        }
        Self::new(1.0, blocks as f64, blocks - 1)
    }

    pub fn n_basis(&self) -> usize {
        self.n_sub + 2
    }

    pub fn n_subintervals(&self) -> usize {
        self.n_sub
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / self.n_sub as f64
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// Full knot vector `t_1..t_{n_sub+5}`.
    pub fn knots(&self) -> Vec<f64> {
        let d = self.spacing();
        let mut knots = vec![self.lower, self.lower];
        knots.extend((0..=self.n_sub).map(|j| {
            if j == self.n_sub {
                self.upper
            } else {
                self.lower + j as f64 * d
            }
        }));
        knots.extend([self.upper, self.upper]);
        knots
    }

    /// Index of the first possibly-nonzero basis function at `t` and the three
    /// values starting there.
    pub fn eval_local(&self, t: f64) -> Result<(usize, [f64; 3])> {
        if !(t >= self.lower && t <= self.upper) {
            return Err(Error::InvalidArgument(format!(
                "t = {t} outside spline domain [{}, {}]",
                self.lower, self.upper
            )));
        }
        let u = (t - self.lower) / self.spacing();
        // left-limit convention at the upper end
        let j = (u.floor() as usize).min(self.n_sub - 1);
        let r = (u - j as f64).clamp(0.0, 1.0);
        let s = 1.0 - r;

        let vals = if self.n_sub == 1 {
            [s * s, 2.0 * r * s, r * r]
        } else if j == 0 {
            [s * s, r * (2.0 - 1.5 * r), 0.5 * r * r]
        } else if j == self.n_sub - 1 {
            [0.5 * s * s, s * (2.0 - 1.5 * s), r * r]
        } else {
            [0.5 * s * s, -r * r + r + 0.5, 0.5 * r * r]
        };
        Ok((j, vals))
    }

    /// All `n_basis` basis values at `t`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let (j, vals) = self.eval_local(t)?;
        let mut out = vec![0.0; self.n_basis()];
        out[j..j + 3].copy_from_slice(&vals);
        Ok(out)
    }

    /// `Σ_k coeffs[k] B_k(t)`.
    pub fn eval_function(&self, coeffs: &[f64], t: f64) -> Result<f64> {
        if coeffs.len() != self.n_basis() {
            return Err(Error::InvalidArgument(format!(
                "expected {} spline coefficients, got {}",
                self.n_basis(),
                coeffs.len()
            )));
        }
        let (j, vals) = self.eval_local(t)?;
        Ok(vals[0] * coeffs[j] + vals[1] * coeffs[j + 1] + vals[2] * coeffs[j + 2])
    }

    /// Weights `(w_t, w_{t+1})` such that a spline at block index `b`
    /// (0-based, block `b + 1`) equals `w_t β_b + w_{t+1} β_{b+1}`.
    ///
    /// Only meaningful for bases built with [`SplineBasis::for_blocks`].
    pub fn block_weights(&self) -> Vec<[f64; 2]> {
        let blocks = self.n_sub + 1;
        (0..blocks)
            .map(|b| {
                let full = self.eval(self.lower + b as f64).expect("block inside domain");
                debug_assert!(full
                    .iter()
                    .enumerate()
                    .all(|(k, &v)| v == 0.0 || k == b || k == b + 1));
                [full[b], full[b + 1]]
            })
            .collect()
    }

    /// Evaluation grid with `per_interval` points per block interval.
    pub fn grid(&self, per_interval: usize) -> Vec<f64> {
        let per = per_interval.max(1);
        let total = self.n_sub * per;
        let step = (self.upper - self.lower) / total as f64;
        (0..=total)
            .map(|i| {
                if i == total {
                    self.upper
                } else {
                    self.lower + i as f64 * step
                }
            })
            .collect()
    }
}

/// Basis for `blocks` experiment blocks.
pub fn make_basis(blocks: usize) -> Result<SplineBasis> {
    SplineBasis::for_blocks(blocks)
}
