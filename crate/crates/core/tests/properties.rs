//! Property tests for the invariants that hold across modules.

use lddmm::bspline::SplineBasis;
use lddmm::config::ModelConfig;
use lddmm::data::{load_dataset, ColumnSchema, Dataset};
use lddmm::diagnostics::geweke_z;
use lddmm::ig::{choice_probability, ig_cdf, ig_log_pdf, AccumulatorParams, RaceParams};
use lddmm::lba::{lba_cdf, lba_pdf};
use lddmm::mcmc::{init_state, run_chain};
use lddmm::model::{family, ModelState, TransitionModel, BOUNDARY, CORRECT, DRIFT, INCORRECT, N_FAMILIES};
use lddmm::posterior::{coclustering_matrix, summarize_curves, Draw, PosteriorDraws};
use lddmm::random::task_rng;
use lddmm::random_effects::{cholesky, difference_penalty, re_log_prior};
use lddmm::simulator::{generate_dataset, ScenarioSpec, StimulusSchedule};
use lddmm::fixed_effects::update_transitions;
use proptest::prelude::*;
use rand::Rng;

fn small_spec(n: usize, t: usize, l: usize) -> ScenarioSpec {
    ScenarioSpec {
        schedule: StimulusSchedule::Balanced,
        ..ScenarioSpec::tone_learning(n, t, l)
    }
}

fn random_state(seed: u64, z_max: usize) -> (Dataset, ModelState) {
    let (ds, _) = generate_dataset(&small_spec(3, 4, 8), seed).unwrap();
    let cfg = ModelConfig {
        z_max,
        ..Default::default()
    };
    let mut state = init_state(&ds, &cfg).unwrap();
    let mut rng = task_rng(seed, 99);
    for v in state.core.values.iter_mut().flatten() {
        *v = rng.random_range(-1.0..1.0);
    }
    for l in state.latent.labels.iter_mut() {
        *l = rng.random_range(0..z_max as u8);
    }
    for v in state.random_effects.values.iter_mut() {
        *v = rng.random_range(-0.3..0.3);
    }
    (ds, state)
}

fn random_draws(seed: u64, n: usize, t: usize, d0: usize, z_max: usize, m: usize) -> PosteriorDraws {
    let dims = lddmm::Dims::new(n, t, d0, z_max).unwrap();
    let (kn, nx) = (dims.n_basis, dims.n_combos());
    let mut rng = task_rng(seed, 0);
    let draws = (0..m)
        .map(|it| Draw {
            iteration: it,
            log_lik: 0.0,
            expressed: [
                (0..nx * kn).map(|_| rng.random_range(-1.0..1.0)).collect(),
                (0..nx * kn).map(|_| rng.random_range(-1.0..1.0)).collect(),
            ],
            latent: (0..kn * nx).map(|_| rng.random_range(0..z_max as u8)).collect(),
            offsets: (0..n * d0).map(|_| rng.random_range(0.1..0.2)).collect(),
            smoothness: [1.0; 2],
            re_variances: [1.0; 4],
            concentration: [1.0; 2],
            transitions: [vec![1.0 / z_max as f64; z_max * z_max], vec![1.0 / z_max as f64; z_max * z_max]],
            random_effects: (0..n * N_FAMILIES * kn).map(|_| rng.random_range(-0.2..0.2)).collect(),
        })
        .collect();
    PosteriorDraws::new(dims, draws)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dataset_round_trips_through_csv(seed in 0u64..1000) {
        let (ds, _) = generate_dataset(&small_spec(2, 3, 8), seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        ds.write_csv(&path).unwrap();
        let back = load_dataset(&path, &ColumnSchema::default()).unwrap();
        prop_assert_eq!(&back, &ds);
        for r in back.records() {
            prop_assert!(back.min_rt(r.subject, r.stimulus).unwrap() <= r.rt);
        }
    }

    #[test]
    fn simulated_rts_exceed_offsets(seed in 0u64..1000) {
        let (ds, truth) = generate_dataset(&small_spec(3, 3, 8), seed).unwrap();
        let d0 = ds.n_categories();
        for r in ds.records() {
            prop_assert!(r.rt > truth.offsets[r.subject * d0 + r.stimulus]);
        }
    }

    #[test]
    fn spline_basis_is_nonnegative_local_and_sums_to_one(blocks in 2usize..20, u in 0.0f64..1.0) {
        let basis = SplineBasis::for_blocks(blocks).unwrap();
        let (lo, hi) = basis.domain();
        let v = basis.eval(lo + u * (hi - lo)).unwrap();
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(v.iter().all(|&x| x >= 0.0));
        let nz: Vec<usize> = (0..v.len()).filter(|&k| v[k] != 0.0).collect();
        prop_assert!(nz.len() <= 3);
        prop_assert!(nz.last().unwrap() - nz[0] <= 2);
    }

    #[test]
    fn spline_jumps_vanish_under_refinement(coeffs in proptest::collection::vec(-2.0f64..2.0, 6)) {
        let basis = SplineBasis::for_blocks(5).unwrap();
        let max_jump = |n: usize| {
            let vals: Vec<f64> = (0..=n).map(|j| basis.eval_function(&coeffs, 1.0 + 4.0 * j as f64 / n as f64).unwrap()).collect();
            vals.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
        };
        let (coarse, fine) = (max_jump(400), max_jump(4000));
        prop_assert!(fine <= coarse / 5.0 + 1e-12);
    }

    #[test]
    fn ig_cdf_is_a_distribution_function(mu in 0.2f64..5.0, b in 0.2f64..4.0, delta in 0.0f64..0.5,
                                          a in 0.0f64..5.0, step in 0.0f64..2.0) {
        let p = AccumulatorParams::new(delta, mu, b).unwrap();
        let (t1, t2) = (delta + a, delta + a + step);
        let (c1, c2) = (ig_cdf(&p, t1), ig_cdf(&p, t2));
        prop_assert!((0.0..=1.0).contains(&c1) && (0.0..=1.0).contains(&c2));
        prop_assert!(c2 >= c1);
        prop_assert!(ig_log_pdf(&p, t2).exp() >= 0.0);
    }

    #[test]
    fn transition_rows_stay_stochastic(seed in 0u64..1000, z_max in 2usize..7) {
        let mut tm = TransitionModel::uniform(z_max);
        let mut rng = task_rng(seed, 0);
        tm.alpha = [rng.random_range(0.05..5.0), rng.random_range(0.05..5.0)];
        let counts = [
            (0..z_max * z_max).map(|_| rng.random_range(0..20)).collect(),
            (0..z_max * z_max).map(|_| rng.random_range(0..20)).collect(),
        ];
        update_transitions(&mut tm, &counts, &mut rng);
        for c in 0..2 {
            for z in 0..z_max {
                let s: f64 = tm.row(c, z).iter().map(|v| v.exp()).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matching_label_pairs_give_equal_block_values(seed in 0u64..1000) {
        let (_, state) = random_state(seed, 3);
        let dims = state.dims;
        for t in 0..dims.n_blocks {
            for x1 in 0..dims.n_combos() {
                for x2 in 0..dims.n_combos() {
                    if state.latent.get(t, x1) == state.latent.get(t, x2)
                        && state.latent.get(t + 1, x1) == state.latent.get(t + 1, x2) {
                        for p in [DRIFT, BOUNDARY] {
                            prop_assert_eq!(state.fixed_log_param(p, t, x1), state.fixed_log_param(p, t, x2));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn re_precision_is_positive_definite(va in 1e-4f64..1e3, vs in 1e-4f64..1e3, k in 2usize..15) {
        let mut q = difference_penalty(k).unwrap();
        q.iter_mut().for_each(|v| *v /= vs);
        for j in 0..k {
            q[j * k + j] += 1.0 / va;
        }
        for i in 0..k {
            for j in 0..k {
                prop_assert_eq!(q[i * k + j], q[j * k + i]);
            }
        }
        prop_assert!(cholesky(&q, k).is_some());
    }

    #[test]
    fn re_prior_is_exchangeable_across_subjects(seed in 0u64..1000) {
        let mut rng = task_rng(seed, 0);
        let subjects: Vec<Vec<f64>> = (0..5).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let total = |order: &[usize]| order.iter().map(|&i| re_log_prior(&subjects[i], 0.7, 0.3)).sum::<f64>();
        let a = total(&[0, 1, 2, 3, 4]);
        let b = total(&[3, 0, 4, 2, 1]);
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn random_effects_depend_only_on_correctness(seed in 0u64..1000) {
        let (_, state) = random_state(seed, 3);
        let dims = state.dims;
        for i in 0..dims.n_subjects {
            for t in 0..dims.n_blocks {
                for s in 0..dims.n_categories {
                    for d in 0..dims.n_categories {
                        let c = if s == d { CORRECT } else { INCORRECT };
                        let x = dims.combo(s, d);
                        for p in [DRIFT, BOUNDARY] {
                            let re = state.log_param(p, i, t, s, d) - state.fixed_log_param(p, t, x);
                            let expected = state.re_log_param(i, family(p, c), t);
                            prop_assert!((re - expected).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn coclustering_is_symmetric_with_unit_diagonal(seed in 0u64..1000, m in 1usize..30) {
        let draws = random_draws(seed, 2, 4, 3, 3, m);
        for t in 0..4 {
            let co = coclustering_matrix(&draws, t).unwrap();
            for a in 0..3 {
                prop_assert_eq!(co[a * 3 + a], 1.0);
                for b in 0..3 {
                    prop_assert_eq!(co[a * 3 + b], co[b * 3 + a]);
                    prop_assert!((0.0..=1.0).contains(&co[a * 3 + b]));
                }
            }
        }
    }

    #[test]
    fn wider_levels_never_narrow_bands(seed in 0u64..1000, lo in 0.5f64..0.9, extra in 0.0f64..0.09) {
        let draws = random_draws(seed, 3, 4, 2, 2, 40);
        let grid = draws.dense_grid(3);
        let curves = draws.population_curves(0, lddmm::posterior::Parameter::Drift, &grid).unwrap();
        let narrow = summarize_curves(&grid, &curves, lo);
        let wide = summarize_curves(&grid, &curves, lo + extra);
        for j in 0..grid.len() {
            prop_assert!(wide.lower[j] <= narrow.lower[j] && wide.upper[j] >= narrow.upper[j]);
        }
    }

    #[test]
    fn geweke_rejects_overlapping_windows(a in 0.05f64..0.9, b in 0.05f64..0.9) {
        let x: Vec<f64> = (0..200).map(|j| (j as f64 * 0.37).sin()).collect();
        let r = geweke_z(&x, a, b);
        prop_assert_eq!(r.is_ok(), a + b <= 1.0);
    }

    #[test]
    fn lba_cdf_is_monotone_and_density_nonnegative(b in 0.2f64..3.0, m in -2.0f64..4.0, v in 0.01f64..2.0,
                                                  t in 0.01f64..5.0, step in 0.0f64..2.0) {
        let c1 = lba_cdf(b, m, v, t).unwrap();
        let c2 = lba_cdf(b, m, v, t + step).unwrap();
        prop_assert!((0.0..=1.0).contains(&c1) && c2 >= c1 - 1e-15);
        prop_assert!(lba_pdf(b, m, v, t).unwrap() >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn stored_draws_satisfy_type_invariants(seed in 0u64..1000) {
        let (ds, _) = generate_dataset(&small_spec(2, 3, 8), seed).unwrap();
        let cfg = ModelConfig { iterations: 30, burn_in: 10, thin: 2, seed, z_max: 4, ..Default::default() };
        let out = run_chain(&ds, &cfg).unwrap();
        let d0 = ds.n_categories();
        for d in &out.draws.draws {
            for c in 0..2 {
                for z in 0..4 {
                    let s: f64 = d.transitions[c][z * 4..(z + 1) * 4].iter().sum();
                    prop_assert!((s - 1.0).abs() < 1e-12);
                }
            }
            prop_assert!(d.smoothness.iter().chain(&d.re_variances).chain(&d.concentration).all(|&v| v > 0.0));
            prop_assert!(d.latent.iter().all(|&l| l < 4));
            for i in 0..ds.n_subjects() {
                for s in 0..d0 {
                    let o = d.offsets[i * d0 + s];
                    prop_assert!(o > 0.0 && o < ds.min_rt(i, s).unwrap());
                }
            }
        }
    }
}

/// Per-cell choice frequencies at `L = 10⁴` trials per block agree with the
/// quadrature probabilities. Sixteen subjects with balanced schedules give
/// 4·10⁴ trials per (stimulus, block) cell, so 0.01 is four standard errors.
#[test]
fn cell_frequencies_match_choice_probabilities() {
    let mut spec = small_spec(16, 2, 10_000);
    spec.re_variances = [0.0; 4];
    spec.schedule = lddmm::simulator::StimulusSchedule::Balanced;
    let (ds, truth) = generate_dataset(&spec, 3).unwrap();
    let (n, d0) = (spec.n_subjects, spec.n_categories);
    let weights = SplineBasis::for_blocks(2).unwrap().block_weights();
    let mut worst = 0.0f64;
    for t in 0..2 {
        for s in 0..d0 {
            let idx = ds.trials_of_block_stimulus(t, s);
            let mut expected = vec![0.0; d0];
            for i in 0..n {
                let mu = (0..d0).map(|d| truth.log_param(DRIFT, i, t, s, d, &weights).exp()).collect();
                let b = (0..d0).map(|d| truth.log_param(BOUNDARY, i, t, s, d, &weights).exp()).collect();
                let rp = RaceParams::new(truth.offsets[i * d0 + s], mu, b).unwrap();
                for (d, e) in expected.iter_mut().enumerate() {
                    *e += choice_probability(&rp, d) / n as f64;
                }
            }
            for (d, e) in expected.iter().enumerate() {
                let freq = idx.iter().filter(|&&j| ds.records()[j].response == d).count() as f64 / idx.len() as f64;
                worst = worst.max((freq - e).abs());
            }
        }
    }
    assert!(worst < 0.01, "max frequency error {worst}");
}
