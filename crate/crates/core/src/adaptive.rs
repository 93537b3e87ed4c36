//! Batch-adaptive proposal scales for random-walk Metropolis–Hastings.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveScale {
    pub log_scale: f64,
    batch_accepted: u64,
    batch_tried: u64,
    n_batches: u64,
    pub accepted: u64,
    pub tried: u64,
}

impl AdaptiveScale {
    pub fn new(scale: f64) -> Self {
        Self {
            log_scale: scale.ln(),
            batch_accepted: 0,
            batch_tried: 0,
            n_batches: 0,
            accepted: 0,
            tried: 0,
        }
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    #[inline]
    pub fn record(&mut self, accepted: bool) {
        self.batch_tried += 1;
        self.tried += 1;
        if accepted {
            self.batch_accepted += 1;
            self.accepted += 1;
        }
    }

    /// Closes the current batch. When `adapt` is set the log scale moves by
    /// `min(0.1, n^{-1/2})` toward `target`. Returns the batch acceptance rate.
    pub fn end_batch(&mut self, target: f64, adapt: bool) -> Option<f64> {
        if self.batch_tried == 0 {
            return None;
        }
        let rate = self.batch_accepted as f64 / self.batch_tried as f64;
        if adapt {
            self.n_batches += 1;
            let step = (1.0 / (self.n_batches as f64).sqrt()).min(0.1);
            if rate > target {
                self.log_scale += step;
            } else {
                self.log_scale -= step;
            }
        }
        self.batch_accepted = 0;
        self.batch_tried = 0;
        Some(rate)
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.tried == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.tried as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moves_toward_target_and_freezes() {
        let mut s = AdaptiveScale::new(1.0);
        for _ in 0..10 {
            s.record(true);
        }
        assert_eq!(s.end_batch(0.44, true), Some(1.0));
        assert!((s.scale() - 0.1f64.exp()).abs() < 1e-12);
        for _ in 0..10 {
            s.record(false);
        }
        let before = s.log_scale;
        s.end_batch(0.44, false);
        assert_eq!(s.log_scale, before);
        assert_eq!(s.end_batch(0.44, true), None);
        assert_eq!(s.acceptance_rate(), 0.5);
    }
}
