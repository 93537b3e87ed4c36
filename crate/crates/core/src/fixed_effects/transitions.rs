//! Dirichlet transition matrices of the latent chains and their concentrations.

use rand::Rng;
use rand_distr::StandardNormal;
use libm::lgamma as ln_gamma;

use crate::adaptive::AdaptiveScale;
use crate::model::{Dims, LatentStateMatrix, TransitionModel, CORRECT, INCORRECT};
use crate::random::log_dirichlet_sample;

/// Transition counts `n[c][z * z_max + z']` split into correct (`d == s`)
/// and incorrect combinations.
pub fn transition_counts(z: &LatentStateMatrix, dims: &Dims) -> [Vec<u32>; 2] {
    let zz = dims.z_max;
    let mut counts = [vec![0u32; zz * zz], vec![0u32; zz * zz]];
    for x in 0..dims.n_combos() {
        let c = dims.transition_type(x);
        for k in 0..dims.n_basis - 1 {
            counts[c][z.get(k, x) * zz + z.get(k + 1, x)] += 1;
        }
    }
    counts
}

/// Draws every row from its Dirichlet full conditional.
pub fn update_transitions<R: Rng + ?Sized>(tm: &mut TransitionModel, counts: &[Vec<u32>; 2], rng: &mut R) {
    let zz = tm.z_max;
    for c in [CORRECT, INCORRECT] {
        let base = tm.alpha[c] / zz as f64;
        for row in 0..zz {
            let conc: Vec<f64> = counts[c][row * zz..(row + 1) * zz]
                .iter()
                .map(|&n| base + n as f64)
                .collect();
            let draw = log_dirichlet_sample(&conc, rng);
            tm.log_pi[c][row * zz..(row + 1) * zz].copy_from_slice(&draw);
        }
    }
}

/// Log of `Ga(alpha; a, b)` times the symmetric Dirichlet densities of `rows`,
/// each row given as log probabilities.
pub fn concentration_log_target(alpha: f64, rows: &[&[f64]], a: f64, b: f64) -> f64 {
    if !(alpha > 0.0) {
        return f64::NEG_INFINITY;
    }
    let mut lp = (a - 1.0) * alpha.ln() - b * alpha;
    for row in rows {
        let zz = row.len() as f64;
        let each = alpha / zz;
        lp += ln_gamma(alpha) - zz * ln_gamma(each) + (each - 1.0) * row.iter().sum::<f64>();
    }
    lp
}

/// One log-scale random-walk step on a concentration. Returns `(value, accepted)`.
pub fn concentration_step<R: Rng + ?Sized>(
    alpha: f64,
    rows: &[&[f64]],
    a: f64,
    b: f64,
    step: f64,
    rng: &mut R,
) -> (f64, bool) {
    let eps: f64 = rng.sample(StandardNormal);
    let prop = alpha * (step * eps).exp();
    let log_ratio = concentration_log_target(prop, rows, a, b) + prop.ln()
        - concentration_log_target(alpha, rows, a, b)
        - alpha.ln();
    if rng.random::<f64>().ln() < log_ratio {
        (prop, true)
    } else {
        (alpha, false)
    }
}

/// Updates `α_C` and `α_I` given the current transition rows.
pub fn update_concentration<R: Rng + ?Sized>(
    tm: &mut TransitionModel,
    a: f64,
    b: f64,
    scales: &mut [AdaptiveScale; 2],
    rng: &mut R,
) {
    let zz = tm.z_max;
    for c in [CORRECT, INCORRECT] {
        let rows: Vec<&[f64]> = (0..zz).map(|r| &tm.log_pi[c][r * zz..(r + 1) * zz]).collect();
        let (v, acc) = concentration_step(tm.alpha[c], &rows, a, b, scales[c].scale(), rng);
        scales[c].record(acc);
        tm.alpha[c] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::task_rng;

    #[test]
    fn hand_counted_transitions() {
        let dims = Dims::new(1, 2, 2, 3).unwrap();
        let mut z = LatentStateMatrix::filled(3, 4, 0);
        // x = 0 (s=0,d=0) correct: 0 -> 1 -> 1
        z.set(1, 0, 1);
        z.set(2, 0, 1);
        // x = 1 (s=0,d=1) incorrect: 2 -> 2 -> 0
        z.set(0, 1, 2);
        z.set(1, 1, 2);
        let counts = transition_counts(&z, &dims);
        assert_eq!(counts[CORRECT][1], 1);
        assert_eq!(counts[CORRECT][4], 1);
        assert_eq!(counts[CORRECT][0], 2); // x = 3 stays at 0 twice
        assert_eq!(counts[INCORRECT][2 * 3 + 2], 1);
        assert_eq!(counts[INCORRECT][2 * 3], 1);
        assert_eq!(counts[INCORRECT][0], 2); // x = 2 stays at 0 twice
        assert_eq!(counts[CORRECT].iter().sum::<u32>() + counts[INCORRECT].iter().sum::<u32>(), 8);
    }

    #[test]
    fn dirichlet_posterior_mean() {
        let mut rng = task_rng(21, 0);
        let mut tm = TransitionModel::uniform(8);
        let mut counts = [vec![0u32; 64], vec![0u32; 64]];
        counts[CORRECT][0] = 10;
        let n = 40_000;
        let mut acc = 0.0;
        let mut zero_row = 0.0;
        for _ in 0..n {
            update_transitions(&mut tm, &counts, &mut rng);
            acc += tm.log_prob(CORRECT, 0, 0).exp();
            zero_row += tm.log_prob(INCORRECT, 3, 5).exp();
        }
        let expect = (10.0 + 1.0 / 8.0) / 11.0;
        assert!((acc / n as f64 - expect).abs() < 0.005);
        assert!((zero_row / n as f64 - 0.125).abs() < 0.005);
    }

    #[test]
    fn identical_proposal_always_accepted() {
        let mut rng = task_rng(2, 0);
        for _ in 0..100 {
            let (v, acc) = concentration_step(1.7, &[], 1.0, 1.0, 0.0, &mut rng);
            assert!(acc);
            assert_eq!(v, 1.7);
        }
    }

    #[test]
    fn prior_only_concentration_matches_gamma() {
        let mut rng = task_rng(4, 0);
        let mut a = 1.0;
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            a = concentration_step(a, &[], 1.0, 1.0, 1.0, &mut rng).0;
            s1 += a;
            s2 += a * a;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
        assert!((var - 1.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn concentration_shift_matches_grid() {
        // Concentrated rows should pull α below the prior mean, diffuse rows above.
        let zz = 8;
        let peaked: Vec<f64> = (0..zz).map(|j| if j == 0 { (1.0f64 - 7e-6).ln() } else { 1e-6f64.ln() }).collect();
        let flat: Vec<f64> = vec![-(zz as f64).ln(); zz];
        let grid_mean = |row: &Vec<f64>| {
            let rows: Vec<&[f64]> = vec![row.as_slice(); 4];
            let xs: Vec<f64> = (1..4000).map(|i| i as f64 * 0.01).collect();
            let lw: Vec<f64> = xs.iter().map(|&x| concentration_log_target(x, &rows, 1.0, 1.0)).collect();
            let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = lw.iter().map(|l| (l - m).exp()).collect();
            xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / w.iter().sum::<f64>()
        };
        let mc_mean = |row: &Vec<f64>| {
            let rows: Vec<&[f64]> = vec![row.as_slice(); 4];
            let mut rng = task_rng(6, 0);
            let mut a = 1.0;
            let n = 100_000;
            let mut s = 0.0;
            for _ in 0..n {
                a = concentration_step(a, &rows, 1.0, 1.0, 0.8, &mut rng).0;
                s += a;
            }
            s / n as f64
        };
        let (gp, gf) = (grid_mean(&peaked), grid_mean(&flat));
        assert!(gp < 1.0 && gf > 1.0);
        let (mp, mf) = (mc_mean(&peaked), mc_mean(&flat));
        assert!(mp < 1.0 && mf > 1.0);
        assert!((mp - gp).abs() < 0.1 * gp.max(0.1));
        assert!((mf - gf).abs() < 0.1 * gf);
    }
}
